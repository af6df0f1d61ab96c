"""Two-level store: subclusters as graph nodes, clusters as components.

Subclusters hold only a running vector sum and count (state scales with
the number of subclusters, not vectors). Clusters are the connected
components of the undirected subcluster graph and carry stable external
ids: on a component merge the side with more vectors keeps its id (tie:
smaller id); on a split the side with more vectors keeps it (tie: the
side containing the smallest subcluster id) and the rest get fresh ids.
Ids are never reused.
"""

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatchError,
    GraphStructureError,
    UnknownSubclusterError,
)
from .hypersphere import centroid as _centroid


class Subcluster:
    """Graph node: running sum, count, cached unit centroid, neighbor ids."""

    __slots__ = ("id", "vector_sum", "count", "centroid", "neighbors")

    def __init__(self, node_id: int, vector_sum: np.ndarray, count: int):
        self.id = node_id
        self.vector_sum = vector_sum
        self.count = count
        self.centroid = _centroid(vector_sum, count)
        self.neighbors: set[int] = set()

    def __repr__(self):
        return f"Subcluster(id={self.id}, count={self.count}, degree={len(self.neighbors)})"


class CentroidIndex:
    """Packed centroid matrix behind the nearest-centroid lookup.

    Rows stay sorted by ascending subcluster id, so the first-maximum
    convention of the scan kernel resolves similarity ties to the smallest
    id. A linear scan is exact; an approximate index could be swapped in
    behind the same interface.
    """

    def __init__(self, dim: int):
        self._dim = dim
        self._ids: list[int] = []
        self._mat = np.empty((16, dim), dtype=np.float64)
        self._row_of: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._ids)

    def add(self, node_id: int, vec: np.ndarray) -> None:
        if self._ids and node_id <= self._ids[-1]:
            raise GraphStructureError("index rows must be added in increasing id order")
        n = len(self._ids)
        if n == self._mat.shape[0]:
            grown = np.empty((2 * n, self._dim), dtype=np.float64)
            grown[:n] = self._mat[:n]
            self._mat = grown
        self._mat[n] = vec
        self._row_of[node_id] = n
        self._ids.append(node_id)

    def update(self, node_id: int, vec: np.ndarray) -> None:
        self._mat[self._row_of[node_id]] = vec

    def remove(self, node_id: int) -> None:
        row = self._row_of.pop(node_id)
        n = len(self._ids)
        self._mat[row : n - 1] = self._mat[row + 1 : n]
        del self._ids[row]
        for nid in self._ids[row:]:
            self._row_of[nid] -= 1

    def best(self, x: np.ndarray) -> tuple[int, float]:
        """Subcluster id with the most similar centroid, and the similarity."""
        if not self._ids:
            raise GraphStructureError("nearest-centroid query on an empty index")
        row, sim = kernels.best_dot(self._mat[: len(self._ids)], x)
        return self._ids[row], sim

    def matrix(self) -> np.ndarray:
        """View of the packed centroid rows (ascending id order)."""
        return self._mat[: len(self._ids)]

    def ids(self) -> list[int]:
        return list(self._ids)

    def row_of(self, node_id: int) -> int:
        return self._row_of[node_id]


class _Component:
    __slots__ = ("nodes", "cluster_id", "vectors")

    def __init__(self, nodes: set[int], cluster_id: int | None, vectors: int):
        self.nodes = nodes
        self.cluster_id = cluster_id
        self.vectors = vectors


class ClusterGraph:
    """Mutable subcluster graph with external cluster-id bookkeeping.

    Single-writer: not safe for concurrent mutation.
    """

    def __init__(self, dimension: int):
        if dimension < 2:
            raise ValueError(f"dimension must be >= 2, got {dimension}")
        self.dimension = dimension
        self.next_subcluster_id = 0
        self.next_cluster_id = 0
        self._subs: dict[int, Subcluster] = {}
        self._index = CentroidIndex(dimension)
        self._comp_of: dict[int, int] = {}
        self._comps: dict[int, _Component] = {}
        self._next_comp_label = 0

    # -- basic accessors ---------------------------------------------------

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._subs

    def subcluster(self, node_id: int) -> Subcluster:
        try:
            return self._subs[node_id]
        except KeyError:
            raise UnknownSubclusterError(f"unknown subcluster id {node_id}") from None

    def subcluster_ids(self) -> list[int]:
        return sorted(self._subs)

    def edges(self) -> list[tuple[int, int]]:
        out = set()
        for node in self._subs.values():
            for nb in node.neighbors:
                out.add((node.id, nb) if node.id < nb else (nb, node.id))
        return sorted(out)

    @property
    def num_subclusters(self) -> int:
        return len(self._subs)

    @property
    def num_clusters(self) -> int:
        return len(self._comps)

    @property
    def total_vectors(self) -> int:
        return sum(c.vectors for c in self._comps.values())

    def nearest_centroid(self, x: np.ndarray) -> tuple[int, float]:
        """Most similar subcluster centroid to x: (subcluster_id, similarity)."""
        return self._index.best(x)

    def centroid_matrix(self) -> np.ndarray:
        return self._index.matrix()

    def centroid_index(self) -> CentroidIndex:
        return self._index

    # -- mutations ----------------------------------------------------------

    def _check_dim(self, x: np.ndarray) -> None:
        if x.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"vector shape {x.shape} does not match graph dimension {self.dimension}"
            )

    def _new_component(self, node_id: int, vectors: int, cluster_id: int | None) -> None:
        label = self._next_comp_label
        self._next_comp_label += 1
        self._comps[label] = _Component({node_id}, cluster_id, vectors)
        self._comp_of[node_id] = label

    def create_subcluster(self, x: np.ndarray, *, new_cluster: bool = True) -> int:
        """Add a singleton node holding x; returns the new subcluster id.

        With new_cluster=False no cluster id is minted: the caller must
        immediately join the node to an existing component via add_edge.
        """
        self._check_dim(x)
        node_id = self.next_subcluster_id
        self.next_subcluster_id += 1
        self._subs[node_id] = Subcluster(node_id, x.copy(), 1)
        self._index.add(node_id, self._subs[node_id].centroid)
        cluster_id = None
        if new_cluster:
            cluster_id = self.next_cluster_id
            self.next_cluster_id += 1
        self._new_component(node_id, 1, cluster_id)
        return node_id

    def add_vector_to_subcluster(self, node_id: int, x: np.ndarray) -> np.ndarray:
        """Fold x into the node's running sum; returns the updated centroid."""
        self._check_dim(x)
        node = self.subcluster(node_id)
        new_sum = node.vector_sum + x
        new_centroid = _centroid(new_sum, node.count + 1)
        node.vector_sum = new_sum
        node.count += 1
        node.centroid = new_centroid
        self._index.update(node_id, new_centroid)
        self._comps[self._comp_of[node_id]].vectors += 1
        return new_centroid

    def add_edge(self, i: int, j: int) -> int:
        """Join nodes i and j; returns the cluster id of their component."""
        if i == j:
            raise GraphStructureError(f"self edge on node {i}")
        a, b = self.subcluster(i), self.subcluster(j)
        if j in a.neighbors:
            raise GraphStructureError(f"edge ({i}, {j}) already exists")
        a.neighbors.add(j)
        b.neighbors.add(i)
        la, lb = self._comp_of[i], self._comp_of[j]
        if la != lb:
            self._union_components(la, lb)
        comp = self._comps[self._comp_of[i]]
        assert comp.cluster_id is not None
        return comp.cluster_id

    def _union_components(self, la: int, lb: int, winner_id: int | None = None) -> None:
        ca, cb = self._comps[la], self._comps[lb]
        if winner_id is None:
            winner_id = self._surviving_cluster_id(ca, cb)
        if len(ca.nodes) < len(cb.nodes):
            la, lb = lb, la
            ca, cb = cb, ca
        for nid in cb.nodes:
            self._comp_of[nid] = la
        ca.nodes |= cb.nodes
        ca.vectors += cb.vectors
        ca.cluster_id = winner_id
        del self._comps[lb]

    @staticmethod
    def _surviving_cluster_id(ca: _Component, cb: _Component) -> int | None:
        # More vectors wins; tie goes to the smaller cluster id. A side
        # without an id (deferred minting) always loses.
        if ca.cluster_id is None:
            return cb.cluster_id
        if cb.cluster_id is None:
            return ca.cluster_id
        if ca.vectors != cb.vectors:
            return ca.cluster_id if ca.vectors > cb.vectors else cb.cluster_id
        return min(ca.cluster_id, cb.cluster_id)

    def remove_edge(self, i: int, j: int) -> tuple[int, int | None]:
        """Remove edge (i, j); returns (kept cluster id, fresh id if split)."""
        a, b = self.subcluster(i), self.subcluster(j)
        if j not in a.neighbors:
            raise GraphStructureError(f"no edge ({i}, {j})")
        a.neighbors.discard(j)
        b.neighbors.discard(i)
        label = self._comp_of[i]
        comp = self._comps[label]
        reach = self._reachable(i)
        assert comp.cluster_id is not None
        if j in reach:
            return comp.cluster_id, None
        side_i = reach
        side_j = comp.nodes - reach
        vec_i = sum(self._subs[n].count for n in side_i)
        vec_j = comp.vectors - vec_i
        if vec_i != vec_j:
            i_keeps = vec_i > vec_j
        else:
            i_keeps = min(side_i) < min(side_j)
        if i_keeps:
            keep_nodes, keep_vectors = side_i, vec_i
            shed_nodes, shed_vectors = side_j, vec_j
        else:
            keep_nodes, keep_vectors = side_j, vec_j
            shed_nodes, shed_vectors = side_i, vec_i
        fresh_id = self.next_cluster_id
        self.next_cluster_id += 1
        comp.nodes = keep_nodes
        comp.vectors = keep_vectors
        new_label = self._next_comp_label
        self._next_comp_label += 1
        self._comps[new_label] = _Component(shed_nodes, fresh_id, shed_vectors)
        for nid in shed_nodes:
            self._comp_of[nid] = new_label
        return comp.cluster_id, fresh_id

    def _reachable(self, start: int) -> set[int]:
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for nid in frontier:
                for nb in self._subs[nid].neighbors:
                    if nb not in seen:
                        seen.add(nb)
                        nxt.append(nb)
            frontier = nxt
        return seen

    def merge_subclusters(self, i: int, j: int) -> int:
        """Fuse nodes i and j into one; returns the surviving id.

        The survivor is the node with the larger count (tie: smaller id).
        It takes the summed vectors and the union of both neighbor sets;
        any edge between i and j disappears. Fusing nodes from different
        components also unites the components under the usual id policy.
        """
        if i == j:
            raise GraphStructureError(f"cannot merge node {i} with itself")
        a, b = self.subcluster(i), self.subcluster(j)
        if a.count > b.count or (a.count == b.count and a.id < b.id):
            surv, gone = a, b
        else:
            surv, gone = b, a

        new_sum = surv.vector_sum + gone.vector_sum
        new_count = surv.count + gone.count
        new_centroid = _centroid(new_sum, new_count)

        la = self._comp_of[surv.id]
        lb = self._comp_of[gone.id]
        winner_id = None
        if la != lb:
            # Record the id policy outcome while both components still have
            # their own vector totals.
            winner_id = self._surviving_cluster_id(self._comps[la], self._comps[lb])

        for nb in gone.neighbors:
            self._subs[nb].neighbors.discard(gone.id)
            if nb != surv.id:
                self._subs[nb].neighbors.add(surv.id)
                surv.neighbors.add(nb)
        surv.neighbors.discard(gone.id)

        surv.vector_sum = new_sum
        surv.count = new_count
        surv.centroid = new_centroid
        self._index.update(surv.id, new_centroid)
        self._index.remove(gone.id)
        del self._subs[gone.id]
        del self._comp_of[gone.id]

        if la == lb:
            self._comps[la].nodes.discard(gone.id)
        else:
            moved = gone.count
            self._comps[lb].nodes.discard(gone.id)
            self._comps[lb].vectors -= moved
            self._comps[la].vectors += moved
            self._union_components(la, lb, winner_id)
        return surv.id

    # -- component queries ---------------------------------------------------

    def component_of(self, node_id: int) -> int:
        """External cluster id of the component containing the node."""
        self.subcluster(node_id)
        cid = self._comps[self._comp_of[node_id]].cluster_id
        assert cid is not None, "node is in a component without a cluster id"
        return cid

    def component_nodes(self, node_id: int) -> set[int]:
        """Subcluster ids sharing the node's component."""
        self.subcluster(node_id)
        return set(self._comps[self._comp_of[node_id]].nodes)

    def components(self) -> dict[int, list[int]]:
        """Partition of subcluster ids keyed by external cluster id."""
        out = {}
        for comp in self._comps.values():
            assert comp.cluster_id is not None
            out[comp.cluster_id] = sorted(comp.nodes)
        return out

    # -- self checks -----------------------------------------------------------

    def check_consistency(self) -> None:
        """Full structural battery; raises GraphStructureError on any defect.

        Intended for tests and debugging, not the hot path.
        """
        problems = []
        for node in self._subs.values():
            if node.id in node.neighbors:
                problems.append(f"self loop on {node.id}")
            for nb in node.neighbors:
                if nb not in self._subs:
                    problems.append(f"edge {node.id}-{nb} to a missing node")
                elif node.id not in self._subs[nb].neighbors:
                    problems.append(f"asymmetric edge {node.id}-{nb}")
            expect = _centroid(node.vector_sum, node.count)
            if not np.allclose(expect, node.centroid, rtol=0, atol=1e-12):
                problems.append(f"stale centroid on {node.id}")
            if abs(np.linalg.norm(node.centroid) - 1.0) > 1e-9:
                problems.append(f"non-unit centroid on {node.id}")
            row = self._index.row_of(node.id)
            if not np.array_equal(self._index.matrix()[row], node.centroid):
                problems.append(f"index row mismatch for {node.id}")

        seen: set[int] = set()
        cluster_ids = []
        for label, comp in self._comps.items():
            if not comp.nodes:
                problems.append(f"empty component {label}")
                continue
            first = min(comp.nodes)
            if self._reachable(first) != comp.nodes:
                problems.append(f"component {label} does not match connectivity")
            if comp.cluster_id is None:
                problems.append(f"component {label} has no cluster id")
            else:
                cluster_ids.append(comp.cluster_id)
            if comp.vectors != sum(self._subs[n].count for n in comp.nodes):
                problems.append(f"component {label} vector count drifted")
            for n in comp.nodes:
                if self._comp_of.get(n) != label:
                    problems.append(f"node {n} carries the wrong component label")
            seen |= comp.nodes
        if seen != set(self._subs):
            problems.append("component node sets do not partition the graph")
        if len(cluster_ids) != len(set(cluster_ids)):
            problems.append("duplicate cluster ids")
        if self._index.ids() != sorted(self._subs):
            problems.append("index id order broken")
        if problems:
            raise GraphStructureError("; ".join(problems))
