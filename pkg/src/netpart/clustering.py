"""Adjacency-constrained agglomerative clustering and the spectral baseline."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans

from .errors import IsolatedRoad, KTooLarge, KTooSmall, LengthMismatch

SIM_EPS = 0.1  # additive constant under the square root of the similarity
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
DENSE_EIGEN_LIMIT = 2000


@dataclass
class ClusterSet:
    """Total assignment road -> dense cluster index in ``0..k-1``."""

    assignment: dict
    k: int

    @classmethod
    def from_labels(cls, roads, labels):
        """Relabel arbitrary labels densely, in order of first appearance."""
        remap = {}
        out = {}
        for road, lab in zip(roads, labels):
            out[road] = remap.setdefault(lab, len(remap))
        return cls(out, len(remap))

    @classmethod
    def from_groups(cls, roads, groups):
        where = {}
        for g, members in enumerate(groups):
            for r in members:
                where[r] = g
        return cls.from_labels(roads, [where[r] for r in roads])

    def clusters(self):
        """Member lists indexed by cluster, each in assignment order."""
        out = [[] for _ in range(self.k)]
        for road, c in self.assignment.items():
            out[c].append(road)
        return out

    def labels(self, roads):
        return np.array([self.assignment[r] for r in roads])

    def to_json(self, method):
        return {"k": self.k, "method": method, "assignment": dict(self.assignment)}


@dataclass
class MergeStep:
    cluster_a: str
    cluster_b: str
    linkage_distance: float
    size: int


@dataclass
class MergeTrace:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)


def feature_matrix(graph, features):
    """Stack a road -> vector table into an array in graph road order."""
    if isinstance(features, np.ndarray):
        x = np.asarray(features, dtype=np.float64)
        if x.shape[0] != len(graph.roads):
            raise ValueError("feature rows must match the graph's road count")
    else:
        missing = [r for r in graph.roads if r not in features]
        extra = [r for r in features if r not in graph.index]
        if missing or extra:
            raise ValueError(f"feature table does not cover the road set (missing={missing[:5]}, extra={extra[:5]})")
        x = np.array([np.asarray(getattr(features[r], "values", features[r]), dtype=np.float64) for r in graph.roads])
    if x.ndim != 2:
        raise ValueError("feature vectors must share one dimensionality")
    if not np.isfinite(x).all():
        raise ValueError("feature table contains non-finite values")
    return x


def linkage_distance(cluster_a, cluster_b):
    """Mean Euclidean distance over all cross pairs (average linkage)."""
    a = np.atleast_2d(np.asarray(cluster_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(cluster_b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("clusters must be non-empty")
    return float(cdist(a, b).mean())


def _check_k(graph, k):
    n = len(graph.roads)
    if k > n:
        raise KTooLarge(f"k={k} exceeds the {n} roads")
    ncomp = graph.component_count()
    if k < max(ncomp, 1):
        raise KTooSmall(f"k={k} is below the {ncomp} connected components of the graph")


def agglomerate(graph, features, k_min=1):
    """Run constrained average-linkage merging down to ``k_min`` clusters.

    Only clusters sharing at least one graph edge are merge candidates.
    Among them the smallest average linkage wins; ties go to the pair with
    the smallest (min road index of a, min road index of b).  Stops early
    if no adjacent pair remains.
    """
    x = feature_matrix(graph, features)
    n = len(graph.roads)
    members = {i: [i] for i in range(n)}
    nbrs = {i: set(graph.neighbors[i]) for i in range(n)}
    version = [0] * n
    sums = {}
    heap = []
    for i, j in graph.edge_index:
        s = float(np.linalg.norm(x[i] - x[j]))
        sums[(i, j)] = s
        heap.append((s, i, j, 0, 0))
    heapq.heapify(heap)

    def cross_sum(a, b):
        key = (a, b) if a < b else (b, a)
        s = sums.get(key)
        if s is None:
            s = float(cdist(x[members[a]], x[members[b]]).sum())
        return s

    trace = MergeTrace()
    count = n
    while count > k_min and heap:
        d, a, b, va, vb = heapq.heappop(heap)
        if a not in members or b not in members or version[a] != va or version[b] != vb:
            continue
        # a < b; the merged cluster keeps the smaller representative
        new_nbrs = (nbrs[a] | nbrs[b]) - {a, b}
        new_sums = {c: cross_sum(c, a) + cross_sum(c, b) for c in sorted(new_nbrs)}
        for c in nbrs[a]:
            sums.pop((min(a, c), max(a, c)), None)
        for c in nbrs[b]:
            sums.pop((min(b, c), max(b, c)), None)
            nbrs[c].discard(b)
        members[a] = members[a] + members.pop(b)
        del nbrs[b]
        nbrs[a] = new_nbrs
        version[a] += 1
        size_a = len(members[a])
        for c, s in new_sums.items():
            nbrs[c].add(a)
            lo, hi = (a, c) if a < c else (c, a)
            sums[(lo, hi)] = s
            heapq.heappush(heap, (s / (size_a * len(members[c])), lo, hi, version[lo], version[hi]))
        count -= 1
        trace.steps.append(MergeStep(graph.roads[a], graph.roads[b], d, size_a))
    return trace


def cut_trace(graph, trace, k):
    """Replay the first ``n - k`` merges of ``trace`` into a :class:`ClusterSet`."""
    n = len(graph.roads)
    if n - k > len(trace.steps):
        raise KTooSmall(f"the merge trace only reaches {n - len(trace.steps)} clusters")
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for step in trace.steps[: n - k]:
        ra, rb = find(graph.index[step.cluster_a]), find(graph.index[step.cluster_b])
        lo, hi = min(ra, rb), max(ra, rb)
        parent[hi] = lo
    return ClusterSet.from_labels(graph.roads, [find(i) for i in range(n)])


def hierarchical_partition(graph, features, k):
    """Partition into ``k`` connected clusters; returns ``(ClusterSet, MergeTrace)``."""
    _check_k(graph, k)
    trace = agglomerate(graph, features, k)
    return cut_trace(graph, trace, k), trace


def hierarchical_sweep(graph, features, ks):
    """Partitions for several ``k`` from a single merge run (they are nested)."""
    ks = sorted(set(ks))
    for k in ks:
        _check_k(graph, k)
    trace = agglomerate(graph, features, ks[0])
    return {k: cut_trace(graph, trace, k) for k in ks}


def similarity(series_p, series_q, adjacent):
    """Inverse regularised Euclidean distance for adjacent roads, else 0."""
    p = np.asarray(series_p, dtype=np.float64)
    q = np.asarray(series_q, dtype=np.float64)
    if p.shape != q.shape:
        raise LengthMismatch(f"series lengths differ: {p.shape} vs {q.shape}")
    if not adjacent:
        return 0.0
    diff = p - q
    return float(1.0 / np.sqrt(np.dot(diff, diff) + SIM_EPS))


def similarity_matrix(graph, series):
    """Sparse symmetric similarity over graph edges (zero diagonal)."""
    x = feature_matrix(graph, series)
    n = len(graph.roads)
    if not graph.edge_index:
        return sparse.csr_matrix((n, n))
    ij = np.array(graph.edge_index)
    diff = x[ij[:, 0]] - x[ij[:, 1]]
    w = 1.0 / np.sqrt(np.einsum("ij,ij->i", diff, diff) + SIM_EPS)
    rows = np.concatenate([ij[:, 0], ij[:, 1]])
    cols = np.concatenate([ij[:, 1], ij[:, 0]])
    return sparse.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))


def spectral_embedding(w, k):
    """Row-normalised eigenvectors of the k smallest normalised-Laplacian eigenvalues."""
    n = w.shape[0]
    deg = np.asarray(w.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    dinv = sparse.diags(inv_sqrt)
    m = dinv @ w @ dinv
    # smallest eigenvalues of I - M are the largest of M
    if n <= DENSE_EIGEN_LIMIT or k >= n - 1:
        lap = np.eye(n) - m.toarray()
        lap = (lap + lap.T) / 2
        _, vecs = eigh(lap, subset_by_index=[0, k - 1])
    else:
        v0 = np.sqrt(deg) / np.linalg.norm(np.sqrt(deg))
        _, vecs = eigsh(m, k=k, which="LA", v0=v0)
        vecs = vecs[:, ::-1]
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vecs / norms


def spectral_partition(graph, series, k, seed=0):
    """Spectral clustering on the adjacency-masked similarity graph.

    Connectivity of the resulting clusters is not enforced.
    """
    n = len(graph.roads)
    if k < 1:
        raise KTooSmall("k must be at least 1")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the {n} roads")
    w = similarity_matrix(graph, series)
    deg = np.asarray(w.sum(axis=1)).ravel()
    for i in np.flatnonzero(deg <= 0):
        raise IsolatedRoad(graph.roads[i])
    if k == 1:
        return ClusterSet.from_labels(graph.roads, [0] * n)
    emb = spectral_embedding(w, k)
    km = KMeans(n_clusters=k, n_init=KMEANS_RESTARTS, max_iter=KMEANS_MAX_ITER, random_state=seed)
    labels = km.fit_predict(emb)
    return ClusterSet.from_labels(graph.roads, labels)


def write_partition(cs, method, path):
    with open(path, "w") as fh:
        json.dump(cs.to_json(method), fh, indent=1, sort_keys=False)
        fh.write("\n")


def read_partition(path):
    with open(path) as fh:
        doc = json.load(fh)
    assignment = {str(r): int(c) for r, c in doc["assignment"].items()}
    return ClusterSet(assignment, int(doc["k"])), doc.get("method")


def partition_geojson(cs, geometry):
    """Copy road features from a GeoJSON collection, tagging each with its cluster.

    Features are matched on ``properties.road_id``; roads without geometry are
    skipped.
    """
    out = []
    for feat in geometry.get("features", []):
        road = str(feat.get("properties", {}).get("road_id"))
        if road in cs.assignment:
            props = dict(feat.get("properties", {}))
            props["cluster"] = cs.assignment[road]
            out.append({"type": "Feature", "geometry": feat.get("geometry"), "properties": props})
    return {"type": "FeatureCollection", "features": out}
