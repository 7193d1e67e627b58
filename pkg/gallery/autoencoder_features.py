"""
Training the convolutional autoencoder
======================================

Each GAF image goes through a stack of stride-2 convolutions down to a
9x9x128 bottleneck; a mirrored stack of transposed convolutions rebuilds
the image.  Averaging the bottleneck over channels gives an 81-long
feature vector per road.
"""

import numpy as np

from netpart import gaf, neuralnet, synth

data = synth.generate(synth.SynthScenario(rows=4, cols=4, region_count=4, seed=0))
day = data.day()
images = np.array([gaf.encode_values(gaf.paa_downsample(day[r].values, 72)).data for r in data.graph.roads])

model = neuralnet.AutoencoderModel.build(72, seed=0)
print("encoder layers:", [layer.kernels.shape[:2] for layer in model.encoder])
print("bottleneck:", model.encode(images[:1]).shape)

###############################################################################
# A short run so the example finishes quickly; the default is 200 epochs.

result = neuralnet.train(model, images, neuralnet.TrainConfig(epochs=30),
                         progress=lambda e, loss: e % 10 == 0 and print(f"epoch {e:3d} loss {loss:.1f}"))
print("loss ratio last/first: %.3f" % (result.losses[-1] / result.losses[0]))

feats = neuralnet.extract_features_batched(model, images)
print("feature table:", feats.shape)

###############################################################################
# Roads from the same planted region should sit closer together in feature
# space than roads from different regions.

labels = np.array([data.truth.assignment[r] for r in data.graph.roads])
d = np.linalg.norm(feats[:, None] - feats[None], axis=-1)
same = d[labels[:, None] == labels[None]].sum() / ((labels[:, None] == labels[None]).sum() - len(labels))
diff = d[labels[:, None] != labels[None]].mean()
print(f"mean distance within regions {same:.4f}, across regions {diff:.4f}")
