"""Dense similarity kernels: numba-compiled hot loops with numpy fallbacks.

The nearest-centroid scan runs once per streamed vector and dominates
clustering runtime, so it is compiled with numba when available. A pure
numpy path computes the same quantities (up to floating-point summation
order) and is selected with the ``LINKS_KERNELS`` environment variable:

* ``auto`` (default): numba if importable, numpy otherwise
* ``numba``: require the JIT path, fail at import if numba is missing
* ``numpy``: force the fallback, never import numba

``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

import numpy as np


def _pick_backend() -> str:
    choice = os.environ.get("LINKS_KERNELS", "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"LINKS_KERNELS must be 'auto', 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _pick_backend()


def best_dot_numpy(mat: np.ndarray, x: np.ndarray) -> tuple[int, float]:
    """Row index with the largest dot product against x, and that product.

    Ties resolve to the smallest row index.
    """
    sims = mat @ x
    j = int(np.argmax(sims))
    return j, float(sims[j])


def pair_dots_numpy(mat: np.ndarray, rows_i: np.ndarray, rows_j: np.ndarray) -> np.ndarray:
    """Dot products between the row pairs (rows_i[k], rows_j[k])."""
    return np.einsum("ij,ij->i", mat[rows_i], mat[rows_j])


if BACKEND == "numba":
    from numba import njit

    @njit(cache=True, fastmath=True)
    def _best_dot_jit(mat, x):  # pragma: no cover - driven through best_dot
        best = -np.inf
        arg = 0
        for r in range(mat.shape[0]):
            s = 0.0
            for d in range(mat.shape[1]):
                s += mat[r, d] * x[d]
            if s > best:
                best = s
                arg = r
        return arg, best

    @njit(cache=True, fastmath=True)
    def _pair_dots_jit(mat, rows_i, rows_j):  # pragma: no cover
        out = np.empty(rows_i.shape[0])
        for k in range(rows_i.shape[0]):
            a = rows_i[k]
            b = rows_j[k]
            s = 0.0
            for d in range(mat.shape[1]):
                s += mat[a, d] * mat[b, d]
            out[k] = s
        return out

    def best_dot_numba(mat: np.ndarray, x: np.ndarray) -> tuple[int, float]:
        j, v = _best_dot_jit(mat, x)
        return int(j), float(v)

    def pair_dots_numba(mat: np.ndarray, rows_i: np.ndarray, rows_j: np.ndarray) -> np.ndarray:
        return _pair_dots_jit(mat, rows_i, rows_j)

    best_dot = best_dot_numba
    pair_dots = pair_dots_numba
else:
    best_dot_numba = None
    pair_dots_numba = None
    best_dot = best_dot_numpy
    pair_dots = pair_dots_numpy
