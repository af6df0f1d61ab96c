"""Streaming clustering of high-dimensional unit vectors.

Each incoming vector receives a cluster id immediately and permanently.
Internally the engine maintains a two-level structure: indivisible
subclusters (running sum + count) as graph nodes, clusters as connected
components, with count-aware similarity thresholds driving merges, edge
removals and rejoins as estimates sharpen.
"""

from .clusterer import (
    ACTION_JOINED,
    ACTION_LINKED,
    ACTION_NEW_CLUSTER,
    AddResult,
    ClustererStats,
    LinksClusterer,
    load_snapshot,
    save_snapshot,
)
from .errors import LinksError
from .evaluation import (
    TuneResult,
    TuningGrid,
    hungarian_max_assignment,
    matched_accuracy,
    tune_grid,
)
from .graph import ClusterGraph
from .hypersphere import (
    GenerativeParams,
    generate_labeled_stream,
    sample_cluster_point,
    sample_uniform_sphere,
    separated_centers,
    theta_mode,
)
from .thresholds import (
    LinksConfig,
    interp_pair_threshold,
    interp_single_threshold,
    pair_threshold,
    single_threshold,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "ACTION_JOINED",
    "ACTION_LINKED",
    "ACTION_NEW_CLUSTER",
    "AddResult",
    "ClusterGraph",
    "ClustererStats",
    "GenerativeParams",
    "LinksClusterer",
    "LinksConfig",
    "LinksError",
    "TuneResult",
    "TuningGrid",
    "generate_labeled_stream",
    "hungarian_max_assignment",
    "interp_pair_threshold",
    "interp_single_threshold",
    "load_snapshot",
    "matched_accuracy",
    "pair_threshold",
    "sample_cluster_point",
    "sample_uniform_sphere",
    "save_snapshot",
    "separated_centers",
    "single_threshold",
    "theta_mode",
    "tune_grid",
    "validate_config",
]
