"""Geometry on the unit hypersphere and a synthetic cluster generator.

All data handled by this package lives on S^(N-1), the set of unit-length
vectors in R^N. Synthetic clusters are drawn from an isotropic density
around a center direction whose angle theta to the center follows

    rho(theta) = A * sin(theta)^(N-2) * exp(-theta^2 / (2 sigma^2))

on [0, pi], where A is the hypersurface area of S^(N-2). The sin factor is
the geometric volume element; the Gaussian factor keeps the distribution
localized around the center.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateCentroidError, DegenerateVectorError, DimensionMismatchError, GenerationError

_THETA_GRID_SIZE = 4096
_CENTER_ATTEMPTS = 100


def normalize(v) -> np.ndarray:
    """Scale v to unit Euclidean norm.

    Raises DegenerateVectorError for zero or non-finite input.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DegenerateVectorError("degenerate vector: non-finite components")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise DegenerateVectorError("degenerate vector: zero norm")
    return arr / norm


def _check_same_dim(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape != v.shape:
        raise DimensionMismatchError(f"dimension mismatch: {u.shape} vs {v.shape}")


def cos_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two unit vectors, clamped to [-1, 1]."""
    _check_same_dim(u, v)
    return float(min(1.0, max(-1.0, float(np.dot(u, v)))))


def angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle between two unit vectors in radians, in [0, pi]."""
    return math.acos(cos_sim(u, v))


def centroid(vector_sum, count: int) -> np.ndarray:
    """Unit-direction estimate for a collection given its component sum.

    The normalized sum minimizes the total squared Euclidean distance to
    the member vectors over unit candidates, so it serves as the estimated
    center of the collection. ``count`` is validated but does not enter
    the arithmetic: exact normalization is used for robustness.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    try:
        return normalize(vector_sum)
    except DegenerateVectorError as exc:
        raise DegenerateCentroidError(f"degenerate centroid: {exc}") from exc


def sample_uniform_sphere(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one vector from the rotation-invariant distribution on S^(dim-1)."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0.0:
            return v / norm


def log_area_sphere(dim_minus_one: int) -> float:
    """log of the hypersurface area of S^d: 2 pi^((d+1)/2) / Gamma((d+1)/2)."""
    half = (dim_minus_one + 1) / 2.0
    return math.log(2.0) + half * math.log(math.pi) - math.lgamma(half)


def marginal_theta_density(theta, sigma: float, dim: int):
    """Density of the angle between a cluster point and its center.

    Evaluates A * sin(theta)^(dim-2) * exp(-theta^2 / (2 sigma^2)) with A
    the hypersurface area of S^(dim-2). The Gaussian factor is truncated to
    [0, pi] without renormalization, so the function is meaningful up to a
    constant factor and is used relatively.

    Accepts a scalar or an array of angles.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if dim < 3:
        raise ValueError(f"dim must be >= 3, got {dim}")
    t = np.asarray(theta, dtype=np.float64)
    area = math.exp(log_area_sphere(dim - 2))
    out = area * np.sin(t) ** (dim - 2) * np.exp(-(t * t) / (2.0 * sigma * sigma))
    if np.isscalar(theta):
        return float(out)
    return out


def _log_marginal_shape(t: np.ndarray, sigma: float, dim: int) -> np.ndarray:
    # Unnormalized log density; safe for large dim where the linear-scale
    # density underflows.
    with np.errstate(divide="ignore"):
        return (dim - 2) * np.log(np.sin(t)) - (t * t) / (2.0 * sigma * sigma)


def theta_mode(sigma: float, dim: int) -> float:
    """Most probable angle between a cluster point and its center.

    Solves (dim-2) * cot(theta) = theta / sigma^2, the stationarity
    condition of the log marginal density. The root is unique in (0, pi).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if dim < 3:
        raise ValueError(f"dim must be >= 3, got {dim}")

    def f(t: float) -> float:
        # (dim-2) cot(t) - t / sigma^2, scaled by sigma^2 sin(t) to stay
        # finite at both ends of the bracket.
        return (dim - 2) * sigma * sigma * math.cos(t) - t * math.sin(t)

    return float(brentq(f, 1e-12, math.pi - 1e-12, xtol=1e-14, rtol=1e-15))


class AngularSampler:
    """Inverse-CDF sampler for the angular marginal at fixed (sigma, dim).

    The CDF is tabulated on a 4096-point uniform grid over
    [0, min(pi, mode + 8 sigma)] and inverted by linear interpolation,
    which keeps draws deterministic for a seeded generator.
    """

    def __init__(self, sigma: float, dim: int, grid_size: int = _THETA_GRID_SIZE):
        if sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {sigma}")
        if dim < 3:
            raise ValueError(f"dim must be >= 3, got {dim}")
        self.sigma = float(sigma)
        self.dim = int(dim)
        hi = min(math.pi, theta_mode(sigma, dim) + 8.0 * sigma)
        grid = np.linspace(0.0, hi, grid_size)
        logd = _log_marginal_shape(grid[1:], sigma, dim)
        dens = np.concatenate([[0.0], np.exp(logd - np.max(logd))])
        cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(grid))])
        self._grid = grid
        self._cdf = cdf / cdf[-1]

    def sample_angles(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` angles from the marginal."""
        u = rng.random(count)
        return np.interp(u, self._cdf, self._grid)

    def sample_point(self, center: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one cluster point around ``center``.

        The angle to the center follows the marginal; the direction within
        the tangent hyperplane is uniform.
        """
        theta = float(self.sample_angles(1, rng)[0])
        tangent = _random_tangent(center, rng)
        return math.cos(theta) * center + math.sin(theta) * tangent


def _random_tangent(center: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    while True:
        t = rng.standard_normal(center.shape[0])
        t -= np.dot(t, center) * center
        norm = np.linalg.norm(t)
        if norm > 1e-12:
            return t / norm


def sample_cluster_point(center: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """One-shot convenience wrapper around AngularSampler.sample_point."""
    return AngularSampler(sigma, center.shape[0]).sample_point(center, rng)


def separated_centers(num: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Centers at the vertices of a randomly oriented regular simplex.

    All pairwise cosine similarities equal -1/(num-1), the most mutually
    separated configuration of ``num`` unit vectors. Uniformly random
    centers concentrate near pairwise right angles in high dimension, so
    this construction is the way to obtain stronger-than-orthogonal
    separation. Requires num <= dim.
    """
    if num < 2:
        raise GenerationError(f"need at least 2 centers, got {num}")
    if num > dim:
        raise GenerationError(f"cannot place {num} simplex centers in dimension {dim}")
    q, _ = np.linalg.qr(rng.standard_normal((dim, num)))
    verts = np.eye(num) - 1.0 / num
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return verts @ q.T


def min_pairwise_angle(centers: np.ndarray) -> float:
    """Smallest angle between any two rows of a stack of unit vectors."""
    gram = np.clip(centers @ centers.T, -1.0, 1.0)
    np.fill_diagonal(gram, -1.0)
    return float(np.arccos(np.max(gram)))


@dataclass(frozen=True)
class GenerativeParams:
    """Parameters for a synthetic labeled stream.

    sigma is the angular spread in radians. When ``min_center_angle`` is
    set, uniformly drawn centers are redrawn until every pairwise angle
    exceeds it (bounded attempts). ``separated_centers`` switches to the
    simplex construction instead, for separations that uniform draws
    cannot reach.
    """

    dimension: int
    sigma: float
    num_clusters: int
    points_per_cluster: int
    seed: int
    min_center_angle: float | None = None
    separated_centers: bool = False

    def validate(self) -> None:
        problems = []
        if self.dimension < 3:
            problems.append(f"dimension must be >= 3, got {self.dimension}")
        if not self.sigma > 0:
            problems.append(f"sigma must be > 0, got {self.sigma}")
        if self.num_clusters < 1:
            problems.append(f"num_clusters must be >= 1, got {self.num_clusters}")
        if self.points_per_cluster < 1:
            problems.append(f"points_per_cluster must be >= 1, got {self.points_per_cluster}")
        if problems:
            raise GenerationError("; ".join(problems))


def _draw_centers(params: GenerativeParams, rng: np.random.Generator) -> np.ndarray:
    if params.separated_centers:
        return separated_centers(params.num_clusters, params.dimension, rng)
    for _ in range(_CENTER_ATTEMPTS):
        centers = np.stack(
            [sample_uniform_sphere(params.dimension, rng) for _ in range(params.num_clusters)]
        )
        if params.min_center_angle is None or params.num_clusters == 1:
            return centers
        if min_pairwise_angle(centers) > params.min_center_angle:
            return centers
    raise GenerationError(
        f"could not draw {params.num_clusters} uniform centers with pairwise angle "
        f"> {params.min_center_angle} in {_CENTER_ATTEMPTS} attempts; "
        "consider separated_centers=True"
    )


def generate_labeled_stream(
    params: GenerativeParams, centers: np.ndarray | None = None
) -> list[tuple[int, np.ndarray]]:
    """Synthesize a shuffled stream of (true_cluster_id, unit_vector) records.

    Centers are drawn uniformly (or per the params layout options) unless
    given explicitly; points are drawn around each center from the angular
    marginal; the interleaving order is a seeded shuffle. Output is
    bit-identical for identical params.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    if centers is None:
        centers = _draw_centers(params, rng)
    else:
        centers = np.asarray(centers, dtype=np.float64)
        if centers.shape != (params.num_clusters, params.dimension):
            raise GenerationError(
                f"centers shape {centers.shape} does not match "
                f"({params.num_clusters}, {params.dimension})"
            )
    sampler = AngularSampler(params.sigma, params.dimension)
    records = []
    for label in range(params.num_clusters):
        for _ in range(params.points_per_cluster):
            records.append((label, sampler.sample_point(centers[label], rng)))
    order = rng.permutation(len(records))
    return [records[i] for i in order]
