"""Accuracy evaluation via optimal id matching, plus grid-search tuning.

Predicted cluster ids are arbitrary, so accuracy is computed after mapping
a subset of predicted ids bijectively onto a subset of true labels in the
way that maximizes the number of matching records (an assignment problem
on the contingency-count matrix). Unmatched predicted ids count as wrong.
"""

import csv
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clusterer import LinksClusterer
from .errors import ConfigError, EvaluationError
from .thresholds import LinksConfig, validate_config


def hungarian_max_assignment(scores, *, lexicographic: bool = True) -> list[tuple[int, int]]:
    """Row-to-column assignment of min(R, C) pairs maximizing total score.

    Rectangular matrices are padded with zero-score entries internally.
    With ``lexicographic`` (the default), the result is the smallest
    optimal assignment under ordering by the sorted (row, column) pair
    list; this costs extra solver calls per row, so large callers that
    only need the optimal value can turn it off.
    """
    mat = np.asarray(scores, dtype=np.float64)
    if mat.ndim != 2 or mat.size == 0:
        raise EvaluationError(f"score matrix must be 2-d and nonempty, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise EvaluationError("score matrix contains non-finite entries")
    rows, cols = mat.shape
    n = max(rows, cols)
    padded = np.zeros((n, n), dtype=np.float64)
    padded[:rows, :cols] = mat

    rr, cc = linear_sum_assignment(padded, maximize=True)
    optimum = float(padded[rr, cc].sum())

    if lexicographic:
        assignment = _lexicographic_refine(padded, optimum)
    else:
        assignment = {int(r): int(c) for r, c in zip(rr, cc)}

    return sorted(
        (r, c) for r, c in assignment.items() if r < rows and c < cols
    )


def _lexicographic_refine(padded: np.ndarray, optimum: float) -> dict[int, int]:
    # Fix one row at a time to its smallest column that preserves the
    # optimal total, re-solving the remainder to verify.
    n = padded.shape[0]
    tol = 1e-9 * max(1.0, abs(optimum))
    free_cols = list(range(n))
    fixed: dict[int, int] = {}
    prefix = 0.0
    for r in range(n):
        rest_rows = np.arange(r + 1, n)
        chosen = None
        fallback = None
        fallback_val = -np.inf
        for c in free_cols:
            rest_cols = [x for x in free_cols if x != c]
            value = prefix + padded[r, c]
            if rest_rows.size:
                sub = padded[np.ix_(rest_rows, rest_cols)]
                sr, sc = linear_sum_assignment(sub, maximize=True)
                value += float(sub[sr, sc].sum())
            if value >= optimum - tol:
                chosen = c
                break
            if value > fallback_val:
                fallback_val = value
                fallback = c
        if chosen is None:
            # Float noise kept every candidate below the tolerance band;
            # the argmax column is optimal up to that noise.
            chosen = fallback
        fixed[r] = chosen
        prefix += padded[r, chosen]
        free_cols.remove(chosen)
    return fixed


def assignment_score(scores, pairs) -> float:
    """Total score of an assignment returned by hungarian_max_assignment."""
    mat = np.asarray(scores, dtype=np.float64)
    return float(sum(mat[r, c] for r, c in pairs))


def _contingency(predicted, truth):
    pred = np.asarray(predicted)
    true = np.asarray(truth)
    pred_ids, pred_idx = np.unique(pred, return_inverse=True)
    true_ids, true_idx = np.unique(true, return_inverse=True)
    table = np.zeros((len(pred_ids), len(true_ids)), dtype=np.int64)
    np.add.at(table, (pred_idx, true_idx), 1)
    return table, pred_ids, true_ids, pred_idx, true_idx


def matched_accuracy(predicted, truth) -> float:
    """Fraction of records whose optimally mapped prediction equals truth.

    Invariant under any renaming of predicted ids or of true labels; 1.0
    exactly when the prediction is a relabeling of the truth.
    """
    predicted = list(predicted)
    truth = list(truth)
    if len(predicted) != len(truth):
        raise EvaluationError(
            f"predicted and truth lengths differ: {len(predicted)} vs {len(truth)}"
        )
    if not predicted:
        raise EvaluationError("cannot score an empty run")
    table, _, _, pred_idx, true_idx = _contingency(predicted, truth)
    # Any optimal assignment yields the same total, so the lexicographic
    # refinement is skipped here.
    pairs = hungarian_max_assignment(table, lexicographic=False)
    mapping = dict(pairs)
    correct = 0
    for p, t in zip(pred_idx, true_idx):
        if mapping.get(int(p)) == int(t):
            correct += 1
    return correct / len(predicted)


@dataclass(frozen=True)
class TuningGrid:
    """Candidate threshold values for a grid search."""

    tc_values: tuple[float, ...]
    ts_values: tuple[float, ...]
    tp_values: tuple[float, ...] = (None,)
    use_anisotropy: bool = True

    def candidates(self):
        """Lexicographically ordered (tc, ts, tp) triples."""
        tps = self.tp_values if self.use_anisotropy else (None,)
        tps = sorted(tps, key=lambda v: (v is None, v))
        return list(product(sorted(self.tc_values), sorted(self.ts_values), tps))


@dataclass(frozen=True)
class TuneRow:
    tc: float
    ts: float
    tp: float | None
    accuracy: float
    clusters_found: int


@dataclass(frozen=True)
class TuneResult:
    best: LinksConfig
    best_accuracy: float
    table: tuple[TuneRow, ...]
    skipped: tuple[tuple[float, float, float | None, str], ...]


def tune_grid(grid: TuningGrid, stream, scorer=None) -> TuneResult:
    """Run one fresh clusterer per candidate config; return the best.

    ``stream`` is a sequence of (true_label, vector) pairs. Ties on
    accuracy go to the lexicographically smallest (tc, ts, tp). Invalid
    candidates are skipped with a recorded reason. Trials are independent,
    so callers may shard them across processes; this implementation runs
    them sequentially for determinism.
    """
    stream = list(stream)
    if not stream:
        raise EvaluationError("cannot tune on an empty stream")
    labels = [label for label, _ in stream]
    dimension = len(stream[0][1])
    score = scorer if scorer is not None else matched_accuracy

    rows: list[TuneRow] = []
    skipped: list[tuple[float, float, float | None, str]] = []
    best_row: TuneRow | None = None
    best_config: LinksConfig | None = None

    candidates = list(grid.candidates())
    if not candidates:
        raise EvaluationError("empty tuning grid")
    for tc, ts, tp in candidates:
        config = LinksConfig(
            dimension=dimension,
            tc=tc,
            ts=ts,
            tp=tp,
            use_anisotropy=grid.use_anisotropy,
        )
        try:
            validate_config(config)
        except ConfigError as exc:
            skipped.append((tc, ts, tp, str(exc)))
            continue
        clusterer = LinksClusterer(config)
        predicted = [clusterer.add_vector(vec).cluster_id for _, vec in stream]
        row = TuneRow(
            tc=tc,
            ts=ts,
            tp=tp,
            accuracy=score(predicted, labels),
            clusters_found=clusterer.stats().num_clusters,
        )
        rows.append(row)
        if best_row is None or row.accuracy > best_row.accuracy:
            best_row = row
            best_config = config
    if best_row is None or best_config is None:
        raise EvaluationError("every candidate in the grid was invalid")
    return TuneResult(
        best=best_config,
        best_accuracy=best_row.accuracy,
        table=tuple(rows),
        skipped=tuple(skipped),
    )


def write_accuracy_table(rows, path) -> None:
    """Emit tuning rows as CSV: T_c, T_s, T_p, accuracy, clusters_found."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["T_c", "T_s", "T_p", "accuracy", "clusters_found"])
        for row in rows:
            writer.writerow(
                [
                    repr(row.tc),
                    repr(row.ts),
                    "" if row.tp is None else repr(row.tp),
                    repr(row.accuracy),
                    row.clusters_found,
                ]
            )
