"""Exception types shared across the package."""


class LinksError(Exception):
    """Base class for every error raised by this package."""


class DegenerateVectorError(LinksError):
    """Input vector has zero norm or non-finite components."""


class DegenerateCentroidError(LinksError):
    """Vector sum has zero norm, so no centroid direction exists."""


class UnitNormError(LinksError):
    """Strict mode rejected a vector whose norm deviates too far from 1."""


class DimensionMismatchError(LinksError):
    """Vector dimension does not match the expected dimension."""


class ConfigError(LinksError):
    """One or more configuration invariants are violated.

    ``problems`` lists every violation, not just the first one found.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnknownSubclusterError(LinksError):
    """Referenced subcluster id does not exist in the graph."""


class GraphStructureError(LinksError):
    """Structurally invalid graph operation (self edge, missing edge, ...)."""


class GenerationError(LinksError):
    """Synthetic stream generation could not satisfy the requested layout."""


class EvaluationError(LinksError):
    """Invalid evaluation input (length mismatch, empty run, empty grid)."""


class InvariantViolation(LinksError):
    """A runtime self-check on clusterer state failed."""


class SnapshotError(LinksError):
    """Base class for snapshot load failures."""


class SnapshotVersionError(SnapshotError):
    """Snapshot document has an unknown format name or version."""


class SnapshotDimensionError(SnapshotError):
    """Snapshot payload is internally inconsistent about dimensionality."""


class SnapshotCorruptError(SnapshotError):
    """Snapshot payload is missing fields or internally inconsistent."""
