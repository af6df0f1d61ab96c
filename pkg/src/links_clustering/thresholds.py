"""Similarity-threshold functions of subcluster sizes, plus configuration.

A subcluster's estimated center direction sharpens as its vector count k
grows, so the cosine-similarity bar for "same cluster" decisions rises
with k. ``single_threshold`` is the bar for a single new vector against a
k-vector subcluster; ``pair_threshold`` compares two subcluster centroids.
The ``interp_*`` variants squash the pair threshold's large-k limit from 1
down to a tunable ceiling ``tp``, compensating for intra-subcluster
correlation and anisotropy that the idealized forms ignore.

All four functions accept scalars or numpy arrays for the count arguments.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def _as_counts(k, name: str):
    arr = np.asarray(k, dtype=np.float64)
    if np.any(arr < 1):
        raise ValueError(f"{name} must be >= 1, got {k}")
    return arr


def _check_tc(tc: float) -> None:
    if not 0.0 < tc < 1.0:
        raise ValueError(f"tc must be in (0, 1), got {tc}")


def _maybe_scalar(out, *inputs):
    if all(np.isscalar(i) for i in inputs):
        return float(out)
    return out


def single_threshold(k, tc: float):
    """Similarity bar for one new vector against a k-vector subcluster.

    Equals tc^2 / sqrt(1/k + (1 - 1/k) tc^2): tc^2 at k=1, strictly
    increasing in k, approaching tc as k grows.
    """
    kk = _as_counts(k, "k")
    _check_tc(tc)
    t2 = tc * tc
    return _maybe_scalar(t2 / np.sqrt(1.0 / kk + (1.0 - 1.0 / kk) * t2), k)


def pair_threshold(k, k2, tc: float):
    """Similarity bar for the centroids of a k- and a k2-vector subcluster.

    Equals 1 / sqrt((1 + q/k)(1 + q/k2)) with q = 1/tc^2 - 1. Symmetric in
    (k, k2), equals single_threshold(k, tc) at k2=1, and approaches 1 as
    both counts grow.
    """
    ka = _as_counts(k, "k")
    kb = _as_counts(k2, "k2")
    _check_tc(tc)
    q = 1.0 / (tc * tc) - 1.0
    return _maybe_scalar(1.0 / np.sqrt((1.0 + q / ka) * (1.0 + q / kb)), k, k2)


def interp_pair_threshold(k, k2, tc: float, tp: float):
    """Pair threshold rescaled so its large-count limit is tp instead of 1.

    Linear interpolation anchored at the k=k2=1 value tc^2:
    tc^2 + (tp - tc^2)/(1 - tc^2) * (pair_threshold - tc^2).
    """
    base = pair_threshold(k, k2, tc)
    t2 = tc * tc
    return _maybe_scalar(t2 + (tp - t2) / (1.0 - t2) * (base - t2), k, k2)


def interp_single_threshold(k, tc: float, tp: float):
    """interp_pair_threshold with the second count fixed at 1."""
    return interp_pair_threshold(k, 1, tc, tp)


@dataclass(frozen=True)
class LinksConfig:
    """Hyperparameters of the streaming clusterer.

    tc: cluster similarity threshold, the cosine of the characteristic
        angle between a cluster's center and its members.
    ts: subcluster similarity threshold, the bar for adding a vector to an
        existing subcluster; controls substructure granularity.
    tp: pair similarity maximum, the large-count ceiling of the pair
        threshold once anisotropy is accounted for. Required (and only
        used) when use_anisotropy is set.
    strict_unit_norm: reject inputs whose norm deviates from 1 by more
        than 1e-6 instead of renormalizing them.
    """

    dimension: int
    tc: float
    ts: float
    tp: float | None = None
    use_anisotropy: bool = True
    strict_unit_norm: bool = False

    def link_threshold(self, k):
        """Bar for attaching a new single-vector subcluster to a k-vector one."""
        if self.use_anisotropy:
            return interp_single_threshold(k, self.tc, self.tp)
        return single_threshold(k, self.tc)

    def edge_threshold(self, k, k2):
        """Bar for an edge between subclusters of the given counts to persist."""
        if self.use_anisotropy:
            return interp_pair_threshold(k, k2, self.tc, self.tp)
        return pair_threshold(k, k2, self.tc)


def validate_config(cfg: LinksConfig) -> LinksConfig:
    """Check every LinksConfig invariant, reporting all violations at once."""
    problems = []
    if not isinstance(cfg.dimension, int) or cfg.dimension < 2:
        problems.append(f"dimension: must be an integer >= 2, got {cfg.dimension}")
    if not 0.0 < cfg.tc < 1.0:
        problems.append(f"tc: must be in (0, 1), got {cfg.tc}")
    if not 0.0 < cfg.ts < 1.0:
        problems.append(f"ts: must be in (0, 1), got {cfg.ts}")
    if cfg.use_anisotropy:
        if cfg.tp is None:
            problems.append("tp: required when use_anisotropy is set")
        else:
            if not cfg.tp < 1.0:
                problems.append(f"tp: must be < 1, got {cfg.tp}")
            if 0.0 < cfg.tc < 1.0 and cfg.tp < cfg.tc * cfg.tc:
                problems.append(
                    f"tp: must be >= tc^2 = {cfg.tc * cfg.tc}, got {cfg.tp}"
                )
    if problems:
        raise ConfigError(problems)
    return cfg
