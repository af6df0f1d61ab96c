"""The online clusterer: one vector in, one cluster id out.

Each arriving vector either joins the most similar subcluster (when the
similarity clears ``ts``) or starts a new subcluster, which is linked to
that most-similar subcluster when the similarity clears the count-aware
link threshold, and otherwise founds a new cluster. Joining a subcluster
moves its centroid, so an update cascade follows:

1. merge pass: any neighbor within ``ts`` of an affected node is fused
   into it, to a fixpoint;
2. validity pass: every edge incident to an affected node is dropped if
   the endpoint similarity no longer clears the pair threshold for the
   current counts;
3. rejoin pass: every node that lost an edge and became separated from
   its former component searches that component for the most similar
   qualifying partner and reconnects through it; if none qualifies the
   split is permanent and the smaller side receives a fresh cluster id.

A rejoin partner within ``ts`` is fused rather than linked (an edge that
close would contradict the merge pass), and the cascade re-runs for the
fused node; the node count drops with every fusion, so this terminates.

Once returned, a cluster id for a vector is never revised.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    DegenerateVectorError,
    DimensionMismatchError,
    InvariantViolation,
    SnapshotCorruptError,
    SnapshotDimensionError,
    SnapshotVersionError,
    UnitNormError,
)
from .graph import ClusterGraph
from .hypersphere import centroid as _canonical_centroid
from .thresholds import LinksConfig, validate_config

ACTION_JOINED = "joined_subcluster"
ACTION_LINKED = "new_subcluster_linked"
ACTION_NEW_CLUSTER = "new_subcluster_new_cluster"

SNAPSHOT_FORMAT = "links-clusterer-state"
SNAPSHOT_VERSION = 1

STRICT_NORM_ATOL = 1e-6


@dataclass(frozen=True)
class AddResult:
    """Outcome of one add_vector call.

    ``subcluster_id`` is the node the vector ended up in after all
    structural updates. The tuples record the cascade in detail: merged
    pairs as (survivor, absorbed), removed and added edges as (i, j).
    """

    cluster_id: int
    subcluster_id: int
    action: str
    merged: tuple[tuple[int, int], ...] = ()
    removed_edges: tuple[tuple[int, int], ...] = ()
    added_edges: tuple[tuple[int, int], ...] = ()

    @property
    def merges_performed(self) -> int:
        return len(self.merged)

    @property
    def edges_removed(self) -> int:
        return len(self.removed_edges)

    @property
    def rejoins(self) -> int:
        return len(self.added_edges)


@dataclass(frozen=True)
class ClustererStats:
    num_clusters: int
    num_subclusters: int
    num_vectors: int
    cluster_size_histogram: dict[int, int] = field(hash=False, default_factory=dict)


class LinksClusterer:
    """Sequential streaming clusterer over unit vectors.

    One instance is a single-writer state machine; run independent
    instances for parallel workloads.
    """

    def __init__(self, config: LinksConfig, seed: int = 0):
        self.config = validate_config(config)
        self.graph = ClusterGraph(config.dimension)
        self.ingested_count = 0
        self.seed = seed  # reserved for randomized tie-breaking; unused

    # -- ingest ----------------------------------------------------------

    def _ingest(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape != (self.config.dimension,):
            raise DimensionMismatchError(
                f"vector shape {arr.shape} does not match configured dimension "
                f"{self.config.dimension}"
            )
        if not np.all(np.isfinite(arr)):
            raise DegenerateVectorError("degenerate vector: non-finite components")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise DegenerateVectorError("degenerate vector: zero norm")
        if self.config.strict_unit_norm and abs(norm - 1.0) > STRICT_NORM_ATOL:
            raise UnitNormError(
                f"strict mode: norm {norm} deviates from 1 by more than {STRICT_NORM_ATOL}"
            )
        return arr / norm

    # -- main entry point --------------------------------------------------

    def add_vector(self, x) -> AddResult:
        """Assign x to a cluster and return the (permanent) cluster id."""
        u = self._ingest(x)
        graph = self.graph
        self.ingested_count += 1

        if graph.num_subclusters == 0:
            sid = graph.create_subcluster(u)
            return AddResult(graph.component_of(sid), sid, ACTION_NEW_CLUSTER)

        j, sim = graph.nearest_centroid(u)

        if sim >= self.config.ts:
            graph.add_vector_to_subcluster(j, u)
            final, merged, removed, added = self._update_after_add(j)
            return AddResult(
                graph.component_of(final),
                final,
                ACTION_JOINED,
                tuple(merged),
                tuple(removed),
                tuple(added),
            )

        k_j = graph.subcluster(j).count
        if sim >= self.config.link_threshold(k_j):
            sid = graph.create_subcluster(u, new_cluster=False)
            graph.add_edge(sid, j)
            return AddResult(graph.component_of(sid), sid, ACTION_LINKED)

        sid = graph.create_subcluster(u)
        return AddResult(graph.component_of(sid), sid, ACTION_NEW_CLUSTER)

    # -- update cascade -----------------------------------------------------

    def _similarity(self, i: int, j: int) -> float:
        return float(np.dot(self.graph.subcluster(i).centroid, self.graph.subcluster(j).centroid))

    def _edge_ok(self, i: int, j: int) -> bool:
        a = self.graph.subcluster(i)
        b = self.graph.subcluster(j)
        return float(np.dot(a.centroid, b.centroid)) >= self.config.edge_threshold(a.count, b.count)

    def _update_after_add(self, start: int):
        """Run merge, validity and rejoin passes around an updated node.

        Returns (node id now holding the added vector, merged pairs,
        removed edges, added edges).
        """
        graph = self.graph
        ts = self.config.ts
        tracked = start
        affected = {start}
        merged_pairs: list[tuple[int, int]] = []
        removed_edges: list[tuple[int, int]] = []
        added_edges: list[tuple[int, int]] = []

        while True:
            # merge pass: fuse ts-close neighbors of affected nodes until
            # none remain; every survivor is affected in turn.
            while True:
                pair = None
                for a in sorted(affected):
                    if a not in graph:
                        continue
                    for nb in sorted(graph.subcluster(a).neighbors):
                        if self._similarity(a, nb) >= ts:
                            pair = (a, nb)
                            break
                    if pair:
                        break
                if pair is None:
                    break
                a, nb = pair
                surv = graph.merge_subclusters(a, nb)
                gone = nb if surv == a else a
                merged_pairs.append((surv, gone))
                affected.discard(gone)
                affected.add(surv)
                if tracked == gone:
                    tracked = surv

            affected = {a for a in affected if a in graph}

            # Snapshot the pre-removal component of every node an affected
            # edge can touch; rejoin searches are scoped to it.
            pre_comp: dict[int, frozenset[int]] = {}
            for a in sorted(affected):
                if a in pre_comp:
                    continue
                nodes = frozenset(graph.component_nodes(a))
                for n in nodes:
                    pre_comp[n] = nodes

            # validity pass over edges incident to affected nodes; the
            # removals do not change any centroid or count, so evaluation
            # order is immaterial and removal is batched after evaluation.
            incident = set()
            for a in affected:
                for nb in graph.subcluster(a).neighbors:
                    incident.add((a, nb) if a < nb else (nb, a))
            failing = [e for e in sorted(incident) if not self._edge_ok(*e)]
            lost_nodes = set()
            for i, j in failing:
                graph.remove_edge(i, j)
                removed_edges.append((i, j))
                lost_nodes.update((i, j))

            # rejoin pass: nodes cut off from their former component look
            # for the most similar qualifying partner within it.
            rejoin_merges = []
            for c in sorted(lost_nodes):
                if c not in graph:
                    continue
                current = graph.component_nodes(c)
                targets = [t for t in sorted(pre_comp[c] - current) if t in graph]
                best_id = None
                best_sim = -np.inf
                for t in targets:
                    s = self._similarity(c, t)
                    if s > best_sim and self._edge_ok_value(c, t, s):
                        best_id, best_sim = t, s
                if best_id is None:
                    continue
                if best_sim >= ts:
                    surv = graph.merge_subclusters(c, best_id)
                    gone = best_id if surv == c else c
                    merged_pairs.append((surv, gone))
                    if tracked == gone:
                        tracked = surv
                    rejoin_merges.append(surv)
                else:
                    graph.add_edge(c, best_id)
                    added_edges.append((c, best_id))

            if not rejoin_merges:
                break
            # A fusion changed a centroid after the validity pass; run the
            # cascade again for the fused nodes. Terminates: every pass
            # through here removed at least one node.
            affected = {s for s in rejoin_merges if s in graph}
            if not affected:
                break

        return tracked, merged_pairs, removed_edges, added_edges

    def _edge_ok_value(self, i: int, j: int, sim: float) -> bool:
        a = self.graph.subcluster(i)
        b = self.graph.subcluster(j)
        return sim >= self.config.edge_threshold(a.count, b.count)

    # -- observability -------------------------------------------------------

    def stats(self) -> ClustererStats:
        """Read-only summary of the current graph."""
        graph = self.graph
        hist: dict[int, int] = {}
        for nodes in graph.components().values():
            size = sum(graph.subcluster(n).count for n in nodes)
            hist[size] = hist.get(size, 0) + 1
        return ClustererStats(
            num_clusters=graph.num_clusters,
            num_subclusters=graph.num_subclusters,
            num_vectors=self.ingested_count,
            cluster_size_histogram=hist,
        )

    def verify_invariants(self) -> None:
        """Assert the state invariants; raises InvariantViolation.

        Checks that every edge clears the pair threshold for the current
        counts, that no edge-joined pair is within ``ts`` (such pairs must
        have merged), and that vector counts are conserved. Debug aid and
        test hook; linear in edges and subclusters.
        """
        graph = self.graph
        if graph.total_vectors != self.ingested_count:
            raise InvariantViolation(
                f"vector conservation broken: graph holds {graph.total_vectors}, "
                f"ingested {self.ingested_count}"
            )
        edges = graph.edges()
        if not edges:
            return
        index = graph.centroid_index()
        rows_i = np.array([index.row_of(i) for i, _ in edges], dtype=np.int64)
        rows_j = np.array([index.row_of(j) for _, j in edges], dtype=np.int64)
        sims = kernels.pair_dots(graph.centroid_matrix(), rows_i, rows_j)
        counts_i = np.array([graph.subcluster(i).count for i, _ in edges], dtype=np.float64)
        counts_j = np.array([graph.subcluster(j).count for _, j in edges], dtype=np.float64)
        bars = self.config.edge_threshold(counts_i, counts_j)
        bad = sims < bars
        if np.any(bad):
            k = int(np.argmax(bad))
            raise InvariantViolation(
                f"edge {edges[k]} similarity {sims[k]} below threshold {bars[k]}"
            )
        close = sims >= self.config.ts
        if np.any(close):
            k = int(np.argmax(close))
            raise InvariantViolation(
                f"edge {edges[k]} similarity {sims[k]} reaches ts={self.config.ts}; "
                "the endpoints should have merged"
            )

    # -- persistence ---------------------------------------------------------

    def to_snapshot(self) -> dict:
        """Self-describing JSON-ready document of the full state.

        Vector sums are serialized at full round-trip precision, so a
        restored clusterer continues bit-identically.
        """
        graph = self.graph
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "config": {
                "dimension": self.config.dimension,
                "tc": self.config.tc,
                "ts": self.config.ts,
                "tp": self.config.tp,
                "use_anisotropy": self.config.use_anisotropy,
                "strict_unit_norm": self.config.strict_unit_norm,
            },
            "seed": self.seed,
            "ingested_count": self.ingested_count,
            "next_subcluster_id": graph.next_subcluster_id,
            "next_cluster_id": graph.next_cluster_id,
            "subclusters": [
                {
                    "id": nid,
                    "count": graph.subcluster(nid).count,
                    "sum": graph.subcluster(nid).vector_sum.tolist(),
                }
                for nid in graph.subcluster_ids()
            ],
            "edges": [list(e) for e in graph.edges()],
            "clusters": {
                str(cid): nodes for cid, nodes in sorted(graph.components().items())
            },
        }

    @classmethod
    def from_snapshot(cls, doc: dict) -> "LinksClusterer":
        """Rebuild a clusterer from a snapshot document."""
        if not isinstance(doc, dict):
            raise SnapshotCorruptError("snapshot is not a JSON object")
        if doc.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotVersionError(
                f"unknown snapshot format {doc.get('format')!r}"
            )
        if doc.get("version") != SNAPSHOT_VERSION:
            raise SnapshotVersionError(
                f"unsupported snapshot version {doc.get('version')!r}; "
                f"expected {SNAPSHOT_VERSION}"
            )
        try:
            cfg_doc = doc["config"]
            config = LinksConfig(
                dimension=cfg_doc["dimension"],
                tc=cfg_doc["tc"],
                ts=cfg_doc["ts"],
                tp=cfg_doc["tp"],
                use_anisotropy=cfg_doc["use_anisotropy"],
                strict_unit_norm=cfg_doc["strict_unit_norm"],
            )
            seed = doc["seed"]
            ingested = doc["ingested_count"]
            next_sub = doc["next_subcluster_id"]
            next_cluster = doc["next_cluster_id"]
            subclusters = doc["subclusters"]
            edges = doc["edges"]
            clusters = doc["clusters"]
        except (KeyError, TypeError) as exc:
            raise SnapshotCorruptError(f"snapshot missing field: {exc}") from exc

        self = cls(config, seed=seed)
        graph = self.graph
        seen_ids = set()
        for entry in sorted(subclusters, key=lambda e: e.get("id", -1)):
            try:
                nid, count, vec = int(entry["id"]), int(entry["count"]), entry["sum"]
            except (KeyError, TypeError, ValueError) as exc:
                raise SnapshotCorruptError(f"bad subcluster entry: {entry!r}") from exc
            if nid in seen_ids or nid < 0:
                raise SnapshotCorruptError(f"bad subcluster id {nid}")
            seen_ids.add(nid)
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (config.dimension,):
                raise SnapshotDimensionError(
                    f"subcluster {nid} sum has shape {arr.shape}, "
                    f"config dimension is {config.dimension}"
                )
            if count < 1:
                raise SnapshotCorruptError(f"subcluster {nid} has count {count}")
            if not np.all(np.isfinite(arr)) or float(np.linalg.norm(arr)) == 0.0:
                raise SnapshotCorruptError(f"subcluster {nid} has a degenerate sum")
            self._restore_node(nid, arr, count)
        for e in edges:
            if (
                not isinstance(e, (list, tuple))
                or len(e) != 2
                or e[0] not in seen_ids
                or e[1] not in seen_ids
            ):
                raise SnapshotCorruptError(f"bad edge {e!r}")
            graph.add_edge(int(e[0]), int(e[1]))
        self._restore_cluster_ids(clusters, next_cluster)
        if next_sub < (max(seen_ids) + 1 if seen_ids else 0):
            raise SnapshotCorruptError("next_subcluster_id below existing ids")
        graph.next_subcluster_id = next_sub
        graph.next_cluster_id = next_cluster
        self.ingested_count = ingested
        if graph.total_vectors != ingested:
            raise SnapshotCorruptError(
                f"subcluster counts sum to {graph.total_vectors}, "
                f"ingested_count says {ingested}"
            )
        return self

    def _restore_node(self, nid: int, vector_sum: np.ndarray, count: int) -> None:
        graph = self.graph
        graph.next_subcluster_id = nid
        sid = graph.create_subcluster(_canonical_centroid(vector_sum, count))
        node = graph.subcluster(sid)
        node.vector_sum = vector_sum
        node.count = count
        node.centroid = _canonical_centroid(vector_sum, count)
        graph.centroid_index().update(sid, node.centroid)
        graph._comps[graph._comp_of[sid]].vectors = count

    def _restore_cluster_ids(self, clusters: dict, next_cluster: int) -> None:
        graph = self.graph
        assigned: dict[int, int] = {}
        for cid_str, nodes in clusters.items():
            try:
                cid = int(cid_str)
            except (TypeError, ValueError) as exc:
                raise SnapshotCorruptError(f"bad cluster id {cid_str!r}") from exc
            if cid < 0 or cid >= next_cluster:
                raise SnapshotCorruptError(
                    f"cluster id {cid} out of range for next_cluster_id {next_cluster}"
                )
            for n in nodes:
                assigned[n] = cid
        structural = {}
        for comp in graph._comps.values():
            ids = {assigned.get(n) for n in comp.nodes}
            if len(ids) != 1 or None in ids:
                raise SnapshotCorruptError(
                    "cluster id map does not match graph connectivity"
                )
            cid = ids.pop()
            if cid in structural:
                raise SnapshotCorruptError(f"cluster id {cid} spans two components")
            structural[cid] = comp
            comp.cluster_id = cid
        if len(assigned) != graph.num_subclusters:
            raise SnapshotCorruptError("cluster id map does not cover every subcluster")


def save_snapshot(clusterer: LinksClusterer, path) -> None:
    """Write a snapshot document as JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clusterer.to_snapshot(), fh)
        fh.write("\n")


def load_snapshot(path) -> LinksClusterer:
    """Read a snapshot document written by save_snapshot."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotCorruptError(f"snapshot is not valid JSON: {exc}") from exc
    return LinksClusterer.from_snapshot(doc)
