"""
Opposite directions of one street
=================================

Two neighbouring roads inside one region can carry mirror-image days: one
slows down in the morning, the other in the evening.  Their mean speeds
are equal, but their GAF images differ, so the autoencoder features pull
them into different clusters once k exceeds the number of regions.
"""

import numpy as np

from netpart import clustering, gaf, neuralnet, synth

scenario = synth.SynthScenario(rows=6, cols=6, region_count=4, seed=0)
data, (a, b) = synth.tidal_pair(scenario)
day = data.day()
print("pair:", a, b, "same region:", data.truth.assignment[a] == data.truth.assignment[b])
print("mean speeds: %.1f %.1f" % (day[a].values.mean(), day[b].values.mean()))

roads = data.graph.roads
images = np.array([gaf.encode_values(gaf.paa_downsample(day[r].values, 72)).data for r in roads])
model = neuralnet.AutoencoderModel.build(72, seed=0)
neuralnet.train(model, images, neuralnet.TrainConfig(epochs=60))
feats = neuralnet.extract_features_batched(model, images)

for k, cs in clustering.hierarchical_sweep(data.graph, feats, range(4, 8)).items():
    together = cs.assignment[a] == cs.assignment[b]
    print(f"k={k}: pair {'together' if together else 'separated'}")
