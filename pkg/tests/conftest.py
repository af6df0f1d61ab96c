"""Shared test helpers: shadow vector store and brute-force oracles."""

import numpy as np
import pytest

from links_clustering.clusterer import LinksClusterer


def brute_force_partition(graph) -> set[frozenset[int]]:
    """Connected components recomputed from scratch by breadth-first search."""
    ids = set(graph.subcluster_ids())
    out = set()
    while ids:
        start = ids.pop()
        comp = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for nid in frontier:
                for nb in graph.subcluster(nid).neighbors:
                    if nb not in comp:
                        comp.add(nb)
                        nxt.append(nb)
            frontier = nxt
        ids -= comp
        out.add(frozenset(comp))
    return out


class ShadowStore:
    """Clusterer wrapper that retains every vector per subcluster.

    The engine itself keeps only sums and counts; this mirror replays the
    structural deltas reported by AddResult so tests can recompute state
    from first principles.
    """

    def __init__(self, clusterer: LinksClusterer):
        self.clusterer = clusterer
        self.vectors: dict[int, list[np.ndarray]] = {}
        self.owner: list[int] = []
        self.results = []

    def add(self, x) -> int:
        arr = np.asarray(x, dtype=np.float64)
        arr = arr / np.linalg.norm(arr)
        result = self.clusterer.add_vector(arr)
        self.results.append(result)
        for surv, gone in result.merged:
            if gone in self.vectors:
                self.vectors.setdefault(surv, []).extend(self.vectors.pop(gone))
            self.owner = [surv if o == gone else o for o in self.owner]
        self.vectors.setdefault(result.subcluster_id, []).append(arr)
        self.owner.append(result.subcluster_id)
        return result.cluster_id

    def verify(self) -> None:
        graph = self.clusterer.graph
        assert sorted(self.vectors) == graph.subcluster_ids()
        for nid, vecs in self.vectors.items():
            node = graph.subcluster(nid)
            assert node.count == len(vecs)
            recomputed = np.add.reduce(vecs)
            assert np.allclose(recomputed, node.vector_sum, rtol=0, atol=1e-9)
            centroid = recomputed / np.linalg.norm(recomputed)
            assert np.allclose(centroid, node.centroid, rtol=0, atol=1e-9)

    def final_assignment(self) -> list[int]:
        """Final cluster id of each input vector, in input order."""
        graph = self.clusterer.graph
        return [graph.component_of(o) for o in self.owner]


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
