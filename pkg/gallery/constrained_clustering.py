"""
Connectivity-constrained hierarchical clustering
================================================

Average-linkage merging where only spatially adjacent clusters may merge,
so every cluster stays a connected piece of the road network.
"""

import numpy as np

from netpart import clustering, synth
from netpart.graph import connected_components

data = synth.generate(synth.SynthScenario(seed=0))
day = data.day()
raw = {r: day[r].values for r in data.graph.roads}

partition, trace = clustering.hierarchical_partition(data.graph, raw, 4)
print("merges performed:", len(trace))
print("cluster sizes:", [len(c) for c in partition.clusters()])
print("ARI against planted regions: %.3f" % synth.adjusted_rand_index(partition, data.truth))

###############################################################################
# One merge run serves every k: the trace is replayed up to the cut.

sweep = clustering.hierarchical_sweep(data.graph, raw, range(2, 9))
for k, cs in sweep.items():
    pieces = [len(connected_components(data.graph, c)) for c in cs.clusters()]
    print(f"k={k}: sizes {sorted(map(len, cs.clusters()), reverse=True)}, all connected: {set(pieces) == {1}}")

###############################################################################
# Cuts are nested: each cluster at k+1 lies inside one cluster at k.

for k in range(2, 8):
    coarse, fine = sweep[k].assignment, sweep[k + 1].assignment
    parents = {}
    for road, c in fine.items():
        parents.setdefault(c, set()).add(coarse[road])
    assert all(len(p) == 1 for p in parents.values())
print("nesting holds")
