"""Partition quality measures on daily speed series.

All distances are L1: the absolute speed difference summed over time slots.
``intra`` averages within-cluster pair distances (lower is better),
``inter`` averages cross distances over spatially adjacent cluster pairs
(higher is better), and ``network_intra`` is the all-pairs mean over the
whole network.  Singleton clusters count as perfectly homogeneous (0).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import KMismatch, MissingSeries, NoAdjacentPairs, TooFewRoads


@dataclass
class MetricsReport:
    k: int
    intra: float
    inter: float
    network_intra: float
    per_cluster_intra: list
    adjacent_pair_count: int
    method: str = ""

    def to_json(self):
        d = asdict(self)
        return {key: d[key] for key in
                ("k", "method", "intra", "inter", "network_intra", "per_cluster_intra", "adjacent_pair_count")}


def _series_block(series, roads):
    missing = [r for r in roads if r not in series]
    if missing:
        raise MissingSeries(f"no series for roads {missing[:5]}")
    block = np.array([np.asarray(getattr(series[r], "values", series[r]), dtype=np.float64) for r in roads])
    if block.ndim != 2:
        raise MissingSeries("series lengths differ")
    return block


def _index_clusters(partition, roads):
    groups = [[] for _ in range(partition.k)]
    for i, r in enumerate(roads):
        groups[partition.assignment[r]].append(i)
    return groups


def _roads(partition, series, graph=None):
    if graph is not None:
        return list(graph.roads)
    return sorted(partition.assignment)


def intra(partition, series, roads=None):
    """Mean within-cluster distance; returns ``(value, per_cluster_values)``."""
    roads = list(roads) if roads is not None else _roads(partition, series)
    x = _series_block(series, roads)
    per = []
    for idx in _index_clusters(partition, roads):
        m = len(idx)
        if m < 2:
            per.append(0.0)
            continue
        # pdist covers unordered pairs; ordered pairs double both sum and count
        per.append(float(2.0 * pdist(x[idx], "cityblock").sum() / (m * (m - 1))))
    return float(np.mean(per)), per


def adjacent_cluster_pairs(partition, graph):
    """Sorted unordered pairs of cluster indices joined by at least one edge."""
    pairs = set()
    for i, j in graph.edge_index:
        a = partition.assignment[graph.roads[i]]
        b = partition.assignment[graph.roads[j]]
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    return sorted(pairs)


def inter(partition, series, graph):
    """Mean cross-cluster distance averaged over adjacent cluster pairs."""
    roads = list(graph.roads)
    x = _series_block(series, roads)
    groups = _index_clusters(partition, roads)
    pairs = adjacent_cluster_pairs(partition, graph)
    if not pairs:
        raise NoAdjacentPairs("no pair of clusters is spatially adjacent")
    vals = [float(cdist(x[groups[a]], x[groups[b]], "cityblock").mean()) for a, b in pairs]
    return float(np.mean(vals))


def network_intra(series, roads=None):
    roads = list(roads) if roads is not None else sorted(series)
    if len(roads) < 2:
        raise TooFewRoads("need at least two roads")
    x = _series_block(series, roads)
    m = len(roads)
    return float(2.0 * pdist(x, "cityblock").sum() / (m * (m - 1)))


def evaluate(partition, series, graph, method=""):
    value, per = intra(partition, series, graph.roads)
    pairs = adjacent_cluster_pairs(partition, graph)
    return MetricsReport(
        k=partition.k,
        intra=value,
        inter=inter(partition, series, graph),
        network_intra=network_intra(series, graph.roads),
        per_cluster_intra=per,
        adjacent_pair_count=len(pairs),
        method=method,
    )


def compare(report_a, report_b):
    """Percent improvement of ``report_a`` over ``report_b``.

    Intra improves when it drops, inter when it rises.
    """
    if report_a.k != report_b.k:
        raise KMismatch(f"cannot compare k={report_a.k} with k={report_b.k}")

    def pct(new, old):
        return 0.0 if new == old else 100.0 * (new - old) / old

    return {
        "k": report_a.k,
        "intra_improvement_pct": 0.0 - pct(report_a.intra, report_b.intra),
        "inter_improvement_pct": pct(report_a.inter, report_b.inter),
    }
