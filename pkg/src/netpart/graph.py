"""Road adjacency graph: roads are nodes, shared intersections are edges."""

from __future__ import annotations

import csv
from collections import deque

import numpy as np
from scipy import sparse

from .errors import OverlappingClusters, SelfLoop, UnknownEndpoint


class RoadGraph:
    """Undirected simple graph over an ordered list of road ids.

    Immutable after construction.  ``index[road]`` gives the position of a
    road in ``roads``; ``neighbors[i]`` is the sorted neighbour index list.
    """

    def __init__(self, roads, edges):
        self.roads = tuple(roads)
        self.index = {r: i for i, r in enumerate(self.roads)}
        if len(self.index) != len(self.roads):
            raise ValueError("duplicate road ids")
        pairs = set()
        for a, b in edges:
            if a not in self.index:
                raise UnknownEndpoint(f"edge endpoint {a!r} is not a known road")
            if b not in self.index:
                raise UnknownEndpoint(f"edge endpoint {b!r} is not a known road")
            i, j = self.index[a], self.index[b]
            if i == j:
                raise SelfLoop(f"road {a!r} cannot be adjacent to itself")
            pairs.add((min(i, j), max(i, j)))
        self.edge_index = tuple(sorted(pairs))
        nbrs = [[] for _ in self.roads]
        for i, j in self.edge_index:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self.neighbors = tuple(tuple(sorted(n)) for n in nbrs)

    def __len__(self):
        return len(self.roads)

    @property
    def edges(self):
        return frozenset(frozenset((self.roads[i], self.roads[j])) for i, j in self.edge_index)

    def degree(self, road):
        return len(self.neighbors[self.index[road]])

    def adjacency_sparse(self):
        n = len(self.roads)
        if not self.edge_index:
            return sparse.csr_matrix((n, n), dtype=np.int8)
        ij = np.array(self.edge_index).T
        rows = np.concatenate([ij[0], ij[1]])
        cols = np.concatenate([ij[1], ij[0]])
        return sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))

    def adjacency_matrix(self):
        """Dense symmetric 0-1 adjacency matrix in ``roads`` order."""
        return self.adjacency_sparse().toarray()

    def component_count(self):
        return len(connected_components(self, self.roads))


def build_graph(roads, edge_list):
    return RoadGraph(roads, edge_list)


def connected_components(graph, subset):
    """Maximal connected groups of the subgraph induced by ``subset``.

    Components are returned as lists of road ids, each in graph order, and
    ordered by their first road.
    """
    members = sorted({graph.index[r] for r in subset})
    inside = set(members)
    seen = set()
    out = []
    for start in members:
        if start in seen:
            continue
        seen.add(start)
        comp = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in graph.neighbors[u]:
                if w in inside and w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        out.append([graph.roads[i] for i in sorted(comp)])
    return out


def clusters_adjacent(graph, cluster_a, cluster_b):
    """True when some road of ``cluster_a`` shares an edge with ``cluster_b``."""
    a = {graph.index[r] for r in cluster_a}
    b = {graph.index[r] for r in cluster_b}
    if a & b:
        raise OverlappingClusters("clusters share roads")
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    return any(w in large for u in small for w in graph.neighbors[u])


def read_edges(path):
    """Read the ``road_a,road_b`` edge-list CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and [c.strip() for c in rows[0]] == ["road_a", "road_b"]:
        rows = rows[1:]
    edges = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ValueError(f"{path}:{lineno}: expected 2 columns")
        edges.append((row[0].strip(), row[1].strip()))
    return edges


def write_edges(graph, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["road_a", "road_b"])
        for i, j in graph.edge_index:
            w.writerow([graph.roads[i], graph.roads[j]])


def read_roads(path):
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def write_roads(roads, path):
    with open(path, "w") as fh:
        fh.writelines(f"{r}\n" for r in roads)
