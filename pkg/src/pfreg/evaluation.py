"""Synthetic corpora and evaluation protocols.

The original palmprint and outdoor-scene image collections are not
redistributable, so every quantitative check here runs on planted-ground-truth
synthetic data: per-subject latent point layouts with controlled jitter, and
an ordered corpus of overlapping scene windows for the neighbor-hit protocol.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from os import cpu_count

import numpy as np

from .errors import EmptyPatch, MissingOrder, PfregError
from .matchers import Backend, MatcherConfig
from .model import (
    TWO_PI,
    MinutiaFeatures,
    PointSet,
    RigidTransform,
    VectorFeatures,
    rotation_matrix,
    wrap_angle,
)
from .pipeline import pf_register
from .voting import VotingConfig

DEFAULT_RADII = (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5)


# ---------------------------------------------------------------------------
# Synthetic subject corpus


@dataclass(frozen=True)
class SyntheticConfig:
    """Shape and noise of a generated identification corpus.

    Each subject gets one latent layout; every sample re-observes it with
    Gaussian position jitter, angle/descriptor jitter scaled to the field,
    random point dropout and optional clutter. Angles follow a von Mises
    distribution around a per-subject direction so that local mean angles are
    stable, as they are for real ridge flows.
    """

    n_subjects: int = 10
    n_ref_per_subject: int = 4
    n_test_per_subject: int = 4
    points_per_full: int = 800
    field_radius: float = 10.0
    patch_radii: tuple[float, ...] = DEFAULT_RADII
    noise_sigma: float = 0.1
    drop_rate: float = 0.1
    clutter_rate: float = 0.0
    seed: int = 0
    feature_variant: str = "minutia"
    vector_dim: int = 16
    angle_concentration: float = 3.0

    def __post_init__(self) -> None:
        for name in ("n_subjects", "n_ref_per_subject", "n_test_per_subject", "points_per_full"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("drop_rate", "clutter_rate"):
            if not (0.0 <= getattr(self, name) < 1.0):
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.field_radius <= 0.0 or self.noise_sigma < 0.0:
            raise ValueError("field_radius must be positive and noise_sigma >= 0")
        if self.feature_variant not in ("minutia", "vector"):
            raise ValueError("feature_variant must be 'minutia' or 'vector'")
        object.__setattr__(self, "patch_radii", tuple(float(r) for r in self.patch_radii))


def _disk_positions(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, TWO_PI, n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def _unit_rows(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    return raw / np.where(norms > 0.0, norms, 1.0)


def generate_subject(cfg: SyntheticConfig, subject_id: int) -> list[PointSet]:
    """All samples of one subject: n_ref_per_subject then n_test_per_subject.

    Bit-identical for identical (cfg.seed, subject_id).
    """
    rng = np.random.default_rng([cfg.seed, subject_id, 0])
    n = cfg.points_per_full
    latent_pos = _disk_positions(rng, n, cfg.field_radius)
    if cfg.feature_variant == "minutia":
        mu = rng.uniform(0.0, TWO_PI)
        latent_angles = wrap_angle(rng.vonmises(mu, cfg.angle_concentration, n))
        latent_kinds = rng.integers(0, 2, n)
    else:
        latent_vals = _unit_rows(rng.normal(size=(n, cfg.vector_dim)))

    sigma_theta = TWO_PI * cfg.noise_sigma / cfg.field_radius
    label = f"s{subject_id:03d}"
    samples = []
    for s in range(cfg.n_ref_per_subject + cfg.n_test_per_subject):
        r = np.random.default_rng([cfg.seed, subject_id, s + 1])
        keep = np.nonzero(r.random(n) >= cfg.drop_rate)[0]
        pos = latent_pos[keep] + r.normal(0.0, cfg.noise_sigma, (keep.size, 2))
        n_clutter = int(round(cfg.clutter_rate * n))
        clutter_pos = _disk_positions(r, n_clutter, cfg.field_radius)
        if cfg.feature_variant == "minutia":
            angles = wrap_angle(latent_angles[keep] + r.normal(0.0, sigma_theta, keep.size))
            kinds = latent_kinds[keep]
            c_angles = wrap_angle(r.vonmises(mu, cfg.angle_concentration, n_clutter))
            feats = MinutiaFeatures(
                np.concatenate([angles, c_angles]),
                np.concatenate([kinds, r.integers(0, 2, n_clutter)]),
            )
        else:
            vals = latent_vals[keep] + r.normal(
                0.0, cfg.noise_sigma / cfg.field_radius, (keep.size, cfg.vector_dim)
            )
            c_vals = r.normal(size=(n_clutter, cfg.vector_dim))
            feats = VectorFeatures(_unit_rows(np.vstack([vals, c_vals])))
        samples.append(
            PointSet(np.vstack([pos, clutter_pos]), feats, label=label)
        )
    return samples


def generate_corpus(cfg: SyntheticConfig) -> tuple[list[PointSet], list[PointSet]]:
    """(reference sets, test sets) over all subjects."""
    refs, tests = [], []
    for subject in range(cfg.n_subjects):
        samples = generate_subject(cfg, subject)
        refs.extend(samples[: cfg.n_ref_per_subject])
        tests.extend(samples[cfg.n_ref_per_subject :])
    return refs, tests


# ---------------------------------------------------------------------------
# Patch extraction


@dataclass(frozen=True)
class PatchTruth:
    """Ground truth of a cut patch.

    transform maps patch coordinates back onto the source set; index_map[i]
    is the source index of patch point i.
    """

    transform: RigidTransform
    index_map: np.ndarray
    center_index: int
    radius: float


def cut_patch(
    full: PointSet,
    radius: float,
    rng_seed,
    min_points: int = 3,
    max_rotation: float = TWO_PI,
) -> tuple[PointSet, PatchTruth]:
    """Cut a disk around a random member point and re-express it rigidly.

    The patch is centered on the chosen point and rotated by a random angle
    in [0, max_rotation); minutia angles shift with the rotation. Raises
    EmptyPatch when fewer than min_points fall inside the disk.
    """
    if len(full) == 0:
        raise EmptyPatch("cannot cut from an empty set")
    rng = np.random.default_rng(rng_seed)
    center_index = int(rng.integers(len(full)))
    center = full.points[center_index]
    idx = np.nonzero(np.linalg.norm(full.points - center, axis=1) <= radius)[0]
    if idx.size < min_points:
        raise EmptyPatch(f"only {idx.size} points within radius {radius}")
    phi = float(rng.uniform(0.0, max_rotation)) if max_rotation > 0.0 else 0.0
    sub = full.subset(idx)
    shift = -(rotation_matrix(phi) @ center)
    patch = sub.transformed(RigidTransform(phi, (float(shift[0]), float(shift[1]))))
    truth = PatchTruth(
        transform=RigidTransform(-phi, (float(center[0]), float(center[1]))),
        index_map=idx,
        center_index=center_index,
        radius=float(radius),
    )
    return patch, truth


# ---------------------------------------------------------------------------
# Identification protocols


def knn_identify(test_distances, ref_labels, k: int = 3) -> str:
    """Majority label among the k nearest references.

    Label ties break by smaller summed distance, then lexicographically.
    """
    d = np.asarray(test_distances, dtype=np.float64)
    if len(ref_labels) < k:
        raise ValueError(f"need at least k={k} references")
    top = np.argsort(d, kind="stable")[:k]
    by_label: dict[str, tuple[int, float]] = {}
    for t in top:
        lbl = ref_labels[t]
        cnt, tot = by_label.get(lbl, (0, 0.0))
        by_label[lbl] = (cnt + 1, tot + float(d[t]))
    return min(by_label.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))[0]


@dataclass(frozen=True)
class EvalReport:
    """Results of a recognition sweep.

    Matrices are |tests| x |refs| and taken at the largest radius; runtimes
    are the median seconds to compare one patch against the whole reference
    set. neighbor_hit is filled only when every set carries an order_index.
    """

    radii: tuple[float, ...]
    recognition_ratio: tuple[float, ...]
    n_evaluated: tuple[int, ...]
    runtime_per_patch: tuple[float, ...]
    distance_matrix: np.ndarray
    inlier_matrix: np.ndarray
    normalized_matrix: np.ndarray
    ref_labels: tuple[str, ...]
    test_labels: tuple[str, ...]
    neighbor_hit: float | None = None

    def __post_init__(self) -> None:
        for r in self.recognition_ratio:
            if not (0.0 <= r <= 1.0):
                raise ValueError("recognition ratios must lie in [0, 1]")


def _cut_with_retry(full, radius, patch_seed, radius_i, test_i, min_points, max_rotation):
    for attempt in range(32):
        try:
            return cut_patch(
                full,
                radius,
                [patch_seed, radius_i, test_i, attempt],
                min_points=min_points,
                max_rotation=max_rotation,
            )
        except EmptyPatch:
            continue
    return None


def _register_row(patch, refs, voting, matcher):
    """Distances, matched sums and inlier counts of one patch vs all refs."""
    nd = np.full(len(refs), np.inf)
    ns = np.zeros(len(refs))
    ni = np.zeros(len(refs), dtype=int)
    t0 = time.perf_counter()
    for r, ref in enumerate(refs):
        try:
            res = pf_register(patch, ref, voting, matcher)
        except PfregError:
            continue
        nd[r] = res.distance
        ns[r] = res.sum_matched
        ni[r] = res.inliers
    return nd, ns, ni, time.perf_counter() - t0


def recognition_sweep(
    refs: list[PointSet],
    tests: list[PointSet],
    radii,
    voting: VotingConfig | None = None,
    matcher: MatcherConfig | None = None,
    *,
    knn: int = 3,
    patch_seed: int = 0,
    min_patch_points: int = 3,
    max_rotation: float | None = None,
    threads: int = 1,
) -> EvalReport:
    """Cut patches at every radius, register against every reference, identify.

    Per radius, the recognition ratio is the fraction of patches whose k-NN
    label over registration distances equals the patch's own label. The same
    patch_seed yields the same patches, so different matcher backends can be
    compared pairwise.
    """
    voting = voting if voting is not None else VotingConfig()
    matcher = matcher if matcher is not None else MatcherConfig()
    radii = tuple(float(r) for r in radii)
    if not refs or not tests:
        raise ValueError("refs and tests must be nonempty")
    if max_rotation is None:
        max_rotation = TWO_PI if refs[0].variant == "minutia" else 0.0

    ref_labels = tuple(s.label or "" for s in refs)
    test_labels = tuple(s.label or "" for s in tests)
    largest = max(range(len(radii)), key=lambda i: radii[i])

    ratios, counts, runtimes = [], [], []
    dist_m = np.full((len(tests), len(refs)), np.inf)
    sum_m = np.zeros((len(tests), len(refs)))
    inl_m = np.zeros((len(tests), len(refs)), dtype=int)

    for ri, radius in enumerate(radii):
        patches = [
            (ti, _cut_with_retry(t, radius, patch_seed, ri, ti, min_patch_points, max_rotation))
            for ti, t in enumerate(tests)
        ]
        patches = [(ti, p) for ti, p in patches if p is not None]

        def task(item):
            ti, (patch, _) = item
            return ti, _register_row(patch, refs, voting, matcher)

        if threads == 1:
            rows = [task(item) for item in patches]
        else:
            workers = threads if threads > 0 else (cpu_count() or 1)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(task, patches))

        correct = 0
        elapsed = []
        for ti, (nd, ns, ni, dt) in rows:
            predicted = knn_identify(nd, ref_labels, k=knn)
            correct += int(predicted == test_labels[ti])
            elapsed.append(dt)
            if ri == largest:
                dist_m[ti] = nd
                sum_m[ti] = ns
                inl_m[ti] = ni
        n_eval = len(rows)
        ratios.append(correct / n_eval if n_eval else 0.0)
        counts.append(n_eval)
        runtimes.append(float(np.median(elapsed)) if elapsed else 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        norm_m = np.where(inl_m > 0, sum_m / np.maximum(inl_m, 1), np.inf)

    neighbor = None
    if all(s.order_index is not None for s in refs + tests):
        neighbor = _neighbor_hit_from_matrix(norm_m, refs, tests)

    return EvalReport(
        radii=radii,
        recognition_ratio=tuple(ratios),
        n_evaluated=tuple(counts),
        runtime_per_patch=tuple(runtimes),
        distance_matrix=dist_m,
        inlier_matrix=inl_m,
        normalized_matrix=norm_m,
        ref_labels=ref_labels,
        test_labels=test_labels,
        neighbor_hit=neighbor,
    )


def _neighbor_hit_from_matrix(normalized, refs, tests) -> float:
    hits = 0
    for ti in range(len(tests)):
        best = int(np.argmin(normalized[ti]))
        hits += int(abs(refs[best].order_index - tests[ti].order_index) <= 1)
    return hits / len(tests)


def neighbor_hit_ratio(
    refs: list[PointSet],
    tests: list[PointSet],
    matcher: MatcherConfig | None = None,
    voting: VotingConfig | None = None,
    *,
    threads: int = 1,
) -> float:
    """Fraction of partial sets whose best reference is an order neighbor.

    tests are partial sets (patches); the best reference minimizes the
    inlier-normalized distance, and a hit means its order_index is within 1
    of the test's. Chance level is about 2/|refs|.
    """
    if any(s.order_index is None for s in refs + tests):
        raise MissingOrder("all refs and tests need an order_index")
    matcher = matcher if matcher is not None else MatcherConfig()
    voting = voting if voting is not None else VotingConfig()

    def task(patch):
        nd, ns, ni, _ = _register_row(patch, refs, voting, matcher)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(ni > 0, ns / np.maximum(ni, 1), np.inf)

    if threads == 1:
        rows = [task(p) for p in tests]
    else:
        workers = threads if threads > 0 else (cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, tests))

    hits = 0
    for ti, row in enumerate(rows):
        best = int(np.argmin(row))
        hits += int(abs(refs[best].order_index - tests[ti].order_index) <= 1)
    return hits / len(tests)


def diagonal_separation(matrix) -> float:
    """How far the diagonal sits below the off-diagonal mass, in off-diag stds.

    Infinite entries are capped at the largest finite value before scoring.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix with aligned diagonal")
    finite = m[np.isfinite(m)]
    if finite.size == 0:
        return 0.0
    capped = np.where(np.isfinite(m), m, finite.max())
    off = capped[~np.eye(m.shape[0], dtype=bool)]
    sd = off.std()
    if sd == 0.0:
        return 0.0
    return float((off.mean() - np.diag(capped).mean()) / sd)


# ---------------------------------------------------------------------------
# Ordered scene corpus (overlapping windows over one latent world)


def generate_ordered_corpus(
    n_scenes: int = 20,
    points_per_scene: int = 120,
    window_width: float = 10.0,
    height: float = 10.0,
    overlap: float = 0.5,
    noise_sigma: float = 0.05,
    feature_noise: float = 0.02,
    vector_dim: int = 16,
    seed: int = 0,
) -> list[PointSet]:
    """Ordered scenes sliding over a shared strip of world points.

    Consecutive scenes share the overlapping part of their windows, so a
    patch from scene t is usually findable in scenes t-1 and t+1 too. Scenes
    carry vector features and order_index = position in the sequence.
    """
    if not (0.0 <= overlap < 1.0):
        raise ValueError("overlap must lie in [0, 1)")
    step = window_width * (1.0 - overlap)
    span = step * (n_scenes - 1) + window_width
    density = points_per_scene / (window_width * height)
    n_world = int(round(density * span * height))

    rng = np.random.default_rng([seed, 0])
    world = np.column_stack(
        (rng.uniform(0.0, span, n_world), rng.uniform(0.0, height, n_world))
    )
    latent = _unit_rows(rng.normal(size=(n_world, vector_dim)))

    scenes = []
    for t in range(n_scenes):
        x0 = t * step
        sel = np.nonzero((world[:, 0] >= x0) & (world[:, 0] <= x0 + window_width))[0]
        r = np.random.default_rng([seed, t + 1])
        pos = world[sel] - np.array([x0, 0.0]) + r.normal(0.0, noise_sigma, (sel.size, 2))
        vals = _unit_rows(latent[sel] + r.normal(0.0, feature_noise, (sel.size, vector_dim)))
        scenes.append(
            PointSet(pos, VectorFeatures(vals), label=f"scene{t:03d}", order_index=t)
        )
    return scenes


# ---------------------------------------------------------------------------
# Runtime benchmarks


def _benchmark_instance(full_size: int, partial_size: int, seed: int):
    cfg = SyntheticConfig(
        n_subjects=1,
        n_ref_per_subject=1,
        n_test_per_subject=1,
        points_per_full=full_size,
        noise_sigma=0.0,
        drop_rate=0.0,
        seed=seed,
    )
    full = generate_subject(cfg, 0)[0]
    radius = cfg.field_radius * math.sqrt(partial_size / full_size)
    patch, _ = cut_patch(full, radius, [seed, 1])
    return patch, full


def benchmark_speedup(
    full_size: int = 800,
    partial_size: int = 50,
    backend: Backend = Backend.HUNGARIAN,
    repeats: int = 3,
    seed: int = 0,
) -> dict:
    """Median wall-clock of two-step registration vs matching the whole set."""
    from .pipeline import direct_register

    patch, full = _benchmark_instance(full_size, partial_size, seed)
    matcher = MatcherConfig(backend=backend)
    voting = VotingConfig()

    pf_times, direct_times = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        pf_register(patch, full, voting, matcher)
        pf_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        direct_register(patch, full, matcher)
        direct_times.append(time.perf_counter() - t0)

    pf_med = float(np.median(pf_times))
    direct_med = float(np.median(direct_times))
    return {
        "full_size": full_size,
        "partial_size": len(patch),
        "backend": backend.value,
        "pf_seconds": pf_med,
        "direct_seconds": direct_med,
        "speedup": direct_med / pf_med if pf_med > 0 else math.inf,
    }


def benchmark_voting_scaling(
    full_sizes=(200, 400, 800),
    partial_size: int = 200,
    repeats: int = 5,
    seed: int = 0,
) -> dict:
    """Per-pair runtime of the voting stage across full-set sizes.

    linearity_ratio is max/min of seconds per (partial x full) pair; values
    near 1 mean the stage scales linearly in the pair count.
    """
    from .voting import build_candidate_matrix, vote_and_sort

    biggest = max(full_sizes)
    patch, full = _benchmark_instance(biggest, partial_size, seed)
    rng = np.random.default_rng([seed, 2])

    rows = []
    for size in full_sizes:
        sub = full.subset(np.sort(rng.choice(len(full), size, replace=False)))
        vcfg = VotingConfig().resolved(patch)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            matrix = build_candidate_matrix(patch, sub, vcfg)
            vote_and_sort(matrix, vcfg)
            times.append(time.perf_counter() - t0)
        med = float(np.median(times))
        pairs = len(patch) * size
        rows.append(
            {
                "full_size": size,
                "pairs": pairs,
                "seconds": med,
                "seconds_per_pair": med / pairs,
            }
        )
    rates = [r["seconds_per_pair"] for r in rows]
    return {"rows": rows, "linearity_ratio": max(rates) / min(rates)}
