"""
Comparing partitions with intra and inter distances
===================================================

``intra`` is the mean L1 distance between roads in the same cluster (lower
is better); ``inter`` is the mean L1 distance across spatially adjacent
clusters (higher is better).
"""

from netpart import clustering, metrics, synth

data = synth.generate(synth.SynthScenario(seed=1))
day = data.day()
raw = {r: day[r].values for r in data.graph.roads}

print("network-wide mean distance: %.1f" % metrics.network_intra(raw))
sweep = clustering.hierarchical_sweep(data.graph, raw, range(2, 9))

print(" k   intra(hier) intra(spec)   inter(hier) inter(spec)")
for k in range(2, 9):
    hier = metrics.evaluate(sweep[k], raw, data.graph, "raw-hier")
    spec = metrics.evaluate(clustering.spectral_partition(data.graph, raw, k), raw, data.graph, "spectral")
    print(f"{k:2d}   {hier.intra:11.1f} {spec.intra:11.1f}   {hier.inter:11.1f} {spec.inter:11.1f}")

###############################################################################
# ``compare`` turns two reports into percent improvements; intra improves
# when it drops, so its sign is flipped.

print(metrics.compare(metrics.evaluate(sweep[4], raw, data.graph),
                      metrics.evaluate(data.truth, raw, data.graph)))
