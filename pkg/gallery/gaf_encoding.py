"""
Encoding a speed series as a Gramian angular field
==================================================

A day of speeds is rescaled to [-1, 1], mapped to polar angles and turned
into an ``n x n`` image whose entry ``(i, j)`` is ``cos(phi_i + phi_j)``.
"""

import numpy as np

from netpart import gaf

# five-minute slots over one day, with a morning and an evening slowdown
t = np.arange(288)
speed = 45 - 20 * np.exp(-0.5 * ((t - 96) / 12) ** 2) - 12 * np.exp(-0.5 * ((t - 210) / 12) ** 2)

norm = gaf.normalize_series(speed)
print("rescaled range:", norm.values.min(), norm.values.max())

###############################################################################
# The diagonal carries the series itself: cos(2 phi) = 2 v^2 - 1, so the
# rescaled values can be read back (up to sign) from the image.

image = gaf.encode_values(speed)
print("image shape:", image.data.shape)
print("diagonal check:", np.allclose(np.diag(image.data), 2 * norm.values**2 - 1))

###############################################################################
# Full-resolution images are 288 x 288.  Piecewise aggregate approximation
# shrinks the series first; 72 slots (20-minute means) keeps both peaks.

small = gaf.encode_values(gaf.paa_downsample(speed, 72))
print("PAA image shape:", small.data.shape)

###############################################################################
# Images can be dumped in a small binary format and read back exactly.

import tempfile, os

path = os.path.join(tempfile.mkdtemp(), "road.gaf")
gaf.write_gaf(small, path)
print("round trip exact:", np.array_equal(gaf.read_gaf(path).data, small.data))
