"""Partial-to-full point-set registration.

Locate a small "partial" salient-point set inside a much larger "full" one:
feature-compatible point pairs vote for candidate centers, the full set is
split around the best candidates, a pluggable matcher aligns the partial with
each sub-set, and the minimum-distance candidate wins.
"""

from .errors import (
    DegenerateInput,
    EmptyPartial,
    EmptyPatch,
    MissingOrder,
    NoCandidates,
    ParseError,
    PfregError,
    UndefinedMean,
    ValidationError,
    VariantMismatch,
)
from .evaluation import (
    EvalReport,
    PatchTruth,
    SyntheticConfig,
    benchmark_speedup,
    benchmark_voting_scaling,
    cut_patch,
    diagonal_separation,
    generate_corpus,
    generate_ordered_corpus,
    generate_subject,
    knn_identify,
    neighbor_hit_ratio,
    recognition_sweep,
)
from .io import (
    load_eval_report,
    load_point_set,
    load_registration_result,
    load_synthetic_config,
    save_eval_report,
    save_point_set,
    save_registration_result,
)
from .matchers import (
    Backend,
    MatcherConfig,
    MatchResult,
    estimate_rigid,
    match,
    match_edit_cost,
    match_greedy,
    match_hough_consistency,
    match_hungarian,
    match_icp,
)
from .metrics import (
    MetricConfig,
    canonical_positions,
    circular_mean,
    cyclical_distance,
    feature_distance,
    feature_distance_matrix,
    inlier_normalized_distance,
    normalize_angles,
    point_distance,
    point_distance_matrix,
    set_distance,
)
from .model import (
    Correspondence,
    Minutia,
    MinutiaFeatures,
    MinutiaKind,
    Point2,
    PointSet,
    RigidTransform,
    VectorFeature,
    VectorFeatures,
    apply_transform,
    compose,
    invert,
)
from .pipeline import CandidateOutcome, RegistrationResult, direct_register, pf_register
from .voting import (
    Candidate,
    CandidateList,
    CandidateMatrix,
    VotingConfig,
    build_candidate_matrix,
    candidate_center,
    split,
    split_indices,
    vote_and_sort,
)

__version__ = "0.1.0"
