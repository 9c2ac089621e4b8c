"""Command-line interface.

Subcommands: register (one partial against one full set), generate (synthetic
corpora), evaluate (recognition sweep over directories), bench (two-step vs
direct runtime). Stdout carries a human-readable summary; files carry the
machine-readable results. Exit codes: 0 ok, 1 usage, 2 data error,
3 partial not found.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import NoCandidates, PfregError
from .evaluation import (
    DEFAULT_RADII,
    SyntheticConfig,
    benchmark_speedup,
    benchmark_voting_scaling,
    generate_corpus,
    generate_ordered_corpus,
    recognition_sweep,
)
from .io import (
    _load_json,
    load_point_set,
    save_eval_report,
    save_point_set,
    save_registration_result,
    synthetic_config_from_dict,
    synthetic_config_to_dict,
)
from .matchers import Backend, MatcherConfig
from .metrics import MetricConfig
from .pipeline import pf_register
from .voting import VotingConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_FOUND = 3

BACKENDS = [b.value for b in Backend]


def _auto_or_float(text: str) -> float | None:
    if text == "auto":
        return None
    return float(text)


def _radii_list(text: str) -> tuple[float, ...]:
    return tuple(float(r) for r in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfreg",
        description="Locate a partial salient-point set inside a full one.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentDefaultsHelpFormatter

    reg = sub.add_parser("register", formatter_class=fmt, help="register one partial against one full set")
    reg.add_argument("--partial", required=True, help="partial point-set file")
    reg.add_argument("--full", required=True, help="full point-set file")
    reg.add_argument("--backend", choices=BACKENDS, default="editcost")
    reg.add_argument("--k", type=int, default=4, help="candidate centers retained")
    reg.add_argument("--epsilon", type=float, default=0.1, help="insertion/deletion cost")
    reg.add_argument("--t-spatial", type=_auto_or_float, default="auto", help="vote merge radius")
    reg.add_argument("--t-feature", type=float, default=0.25, help="max feature distance for a vote")
    reg.add_argument("--t-radius", type=_auto_or_float, default="auto", help="split radius")
    reg.add_argument("--w-feature", type=float, default=0.5, help="feature weight (position gets 1 - this)")
    reg.add_argument("--position-scale", type=_auto_or_float, default="auto", help="position distance divisor")
    reg.add_argument("--config", help="JSON file with the same keys; flags override it")
    reg.add_argument("--out", help="write the result document here")
    reg.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    gen = sub.add_parser("generate", formatter_class=fmt, help="write a synthetic corpus")
    gen.add_argument("--config", required=True, help="JSON corpus description")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--quiet", action="store_true")

    ev = sub.add_parser("evaluate", formatter_class=fmt, help="recognition sweep over directories")
    ev.add_argument("--refs", required=True, help="directory of reference point-set files")
    ev.add_argument("--tests", required=True, help="directory of test point-set files")
    ev.add_argument("--radii", type=_radii_list, default=",".join(str(r) for r in DEFAULT_RADII))
    ev.add_argument("--backend", choices=BACKENDS, default="editcost")
    ev.add_argument("--k", type=int, default=4)
    ev.add_argument("--epsilon", type=float, default=0.1)
    ev.add_argument("--t-feature", type=float, default=0.25)
    ev.add_argument("--knn", type=int, default=3, help="neighbors used for identification")
    ev.add_argument("--patch-seed", type=int, default=0)
    ev.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto, 1 = serial)")
    ev.add_argument("--out-dir", required=True)
    ev.add_argument("--quiet", action="store_true")

    be = sub.add_parser("bench", formatter_class=fmt, help="two-step vs direct runtime")
    be.add_argument("--full-size", type=int, default=800)
    be.add_argument("--partial-size", type=int, default=50)
    be.add_argument("--backend", choices=BACKENDS, default="hungarian")
    be.add_argument("--repeats", type=int, default=3)
    be.add_argument("--sizes", type=_radii_list, default="200,400,800", help="full sizes for the voting scaling check")
    be.add_argument("--out", help="write the benchmark table here")
    be.add_argument("--quiet", action="store_true")

    return parser


def _passed(argv, name: str) -> bool:
    return any(a == name or a.startswith(name + "=") for a in argv)


def _merged(args, argv, config: dict, key: str, flag: str):
    """CLI flag > config file > built-in default."""
    attr = flag.lstrip("-").replace("-", "_")
    if _passed(argv, flag) or key not in config:
        return getattr(args, attr)
    return config[key]


def _cmd_register(args, argv) -> int:
    config = _load_json(args.config) if args.config else {}
    if not isinstance(config, dict):
        raise PfregError(f"{args.config}: config must be a JSON object")

    partial = load_point_set(args.partial)
    full = load_point_set(args.full)

    w_feature = float(_merged(args, argv, config, "w_feature", "--w-feature"))
    voting = VotingConfig(
        t_spatial=_merged(args, argv, config, "t_spatial", "--t-spatial"),
        t_feature=float(_merged(args, argv, config, "t_feature", "--t-feature")),
        t_radius=_merged(args, argv, config, "t_radius", "--t-radius"),
        k=int(_merged(args, argv, config, "k", "--k")),
    )
    matcher = MatcherConfig(
        backend=Backend(_merged(args, argv, config, "backend", "--backend")),
        epsilon=float(_merged(args, argv, config, "epsilon", "--epsilon")),
        metric=MetricConfig(
            w_feature=w_feature,
            w_position=1.0 - w_feature,
            position_scale=_merged(args, argv, config, "position_scale", "--position-scale"),
        ),
    )

    result = pf_register(partial, full, voting, matcher)

    if args.out:
        save_registration_result(result, args.out)
    if not args.quiet:
        t = result.transform
        print(f"distance {result.distance:.6g}  inliers {result.inliers}/{len(partial)}")
        print(
            f"transform rotation {t.rotation:.6g} rad, "
            f"translation ({t.translation[0]:.6g}, {t.translation[1]:.6g})"
        )
        for i, c in enumerate(result.per_candidate):
            mark = "*" if i == result.best_candidate else " "
            d = f"{c.distance:.6g}" if math.isfinite(c.distance) else "-"
            print(f"{mark} candidate {i}: center ({c.center.x:.4g}, {c.center.y:.4g}) votes {c.votes} distance {d}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    doc = _load_json(args.config)
    out = Path(args.out_dir)
    if isinstance(doc, dict) and doc.get("corpus") == "ordered":
        known = {"corpus", "n_scenes", "points_per_scene", "window_width", "height",
                 "overlap", "noise_sigma", "feature_noise", "vector_dim", "seed"}
        kwargs = {k: v for k, v in doc.items() if k in known and k != "corpus"}
        scenes = generate_ordered_corpus(**kwargs)
        names = []
        for s in scenes:
            name = f"scenes/{s.label}.json"
            save_point_set(s, out / name)
            names.append(name)
        manifest = {"corpus": "ordered", "scenes": names, "config": doc}
        written = len(names)
    else:
        cfg = synthetic_config_from_dict(doc, where=str(args.config))
        refs, tests = generate_corpus(cfg)
        ref_names, test_names = [], []
        for i, s in enumerate(refs):
            name = f"refs/{s.label}_{i % cfg.n_ref_per_subject}.json"
            save_point_set(s, out / name)
            ref_names.append(name)
        for i, s in enumerate(tests):
            name = f"tests/{s.label}_{i % cfg.n_test_per_subject}.json"
            save_point_set(s, out / name)
            test_names.append(name)
        manifest = {
            "corpus": "subjects",
            "refs": ref_names,
            "tests": test_names,
            "config": synthetic_config_to_dict(cfg),
        }
        written = len(ref_names) + len(test_names)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if not args.quiet:
        print(f"wrote {written} point sets under {out}")
    return EXIT_OK


def _load_dir(path) -> list:
    files = sorted(Path(path).glob("*.json"))
    if not files:
        raise PfregError(f"{path}: no point-set files found")
    return [load_point_set(f) for f in files]


def _cmd_evaluate(args) -> int:
    refs = _load_dir(args.refs)
    tests = _load_dir(args.tests)
    voting = VotingConfig(t_feature=args.t_feature, k=args.k)
    matcher = MatcherConfig(backend=Backend(args.backend), epsilon=args.epsilon)
    report = recognition_sweep(
        refs,
        tests,
        args.radii,
        voting,
        matcher,
        knn=args.knn,
        patch_seed=args.patch_seed,
        threads=args.threads,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_eval_report(report, out / "report.json")
    with open(out / "ratio_vs_radius.csv", "w") as fh:
        fh.write("radius,recognition_ratio,n_evaluated\n")
        for r, ratio, n in zip(report.radii, report.recognition_ratio, report.n_evaluated):
            fh.write(f"{r},{ratio},{n}\n")
    with open(out / "runtime_vs_radius.csv", "w") as fh:
        fh.write("radius,seconds_per_patch\n")
        for r, s in zip(report.radii, report.runtime_per_patch):
            fh.write(f"{r},{s}\n")
    if not args.quiet:
        print("radius  ratio   n  seconds/patch")
        for r, ratio, n, s in zip(
            report.radii, report.recognition_ratio, report.n_evaluated, report.runtime_per_patch
        ):
            print(f"{r:6.3g}  {ratio:5.3f}  {n:3d}  {s:.4f}")
        if report.neighbor_hit is not None:
            print(f"neighbor-hit ratio: {report.neighbor_hit:.3f}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    speed = benchmark_speedup(
        full_size=args.full_size,
        partial_size=args.partial_size,
        backend=Backend(args.backend),
        repeats=args.repeats,
    )
    scaling = benchmark_voting_scaling(
        full_sizes=tuple(int(s) for s in args.sizes), repeats=max(args.repeats, 3)
    )
    table = {"speedup": speed, "voting_scaling": scaling}
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(table, indent=2) + "\n")
    if not args.quiet:
        print(
            f"two-step {speed['pf_seconds']:.4f}s vs direct {speed['direct_seconds']:.4f}s"
            f" on |full|={speed['full_size']}, |partial|={speed['partial_size']}"
            f" ({speed['backend']}): speedup {speed['speedup']:.1f}x"
        )
        print("voting stage: full_size pairs seconds seconds/pair")
        for row in scaling["rows"]:
            print(
                f"  {row['full_size']:8d} {row['pairs']:6d} {row['seconds']:.5f}"
                f" {row['seconds_per_pair']:.3e}"
            )
        print(f"linearity ratio (max/min per-pair): {scaling['linearity_ratio']:.2f}")
    return EXIT_OK


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help and 2 for usage errors.
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        if args.command == "register":
            return _cmd_register(args, argv)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return EXIT_USAGE
    except NoCandidates as e:
        print(f"not found: {e}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (PfregError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> int:
    return run_cli(sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
