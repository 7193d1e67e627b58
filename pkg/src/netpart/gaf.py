"""Gramian Angular (summation) Field encoding of daily speed series."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConstantSeries, NotDivisible, TooShort


@dataclass(frozen=True, eq=False)
class NormalizedSeries:
    values: np.ndarray
    source_min: float
    source_max: float


@dataclass(frozen=True, eq=False)
class PolarSeries:
    angles: np.ndarray
    radii: np.ndarray
    span_constant: float
    # rescaled values, kept so the Gramian can be formed without cos(arccos(.))
    cosines: np.ndarray


@dataclass(frozen=True, eq=False)
class GafMatrix:
    data: np.ndarray

    @property
    def n(self):
        return self.data.shape[0]


def normalize_series(values):
    """Min-max rescale ``values`` onto [-1, 1]."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or len(v) < 2:
        raise TooShort("series needs at least two values")
    lo, hi = float(v.min()), float(v.max())
    if not hi > lo:
        raise ConstantSeries(f"series is constant at {lo}")
    scaled = ((v - hi) + (v - lo)) / (hi - lo)
    # pin the extremes; rounding can push them a hair past +-1
    np.clip(scaled, -1.0, 1.0, out=scaled)
    return NormalizedSeries(scaled, lo, hi)


def to_polar(norm, span_constant=None):
    """Angles ``arccos(v)`` and radii ``t / N`` with 1-based slot index ``t``."""
    v = norm.values if isinstance(norm, NormalizedSeries) else np.asarray(norm, dtype=np.float64)
    n = len(v)
    span = float(n if span_constant is None else span_constant)
    return PolarSeries(np.arccos(v), np.arange(1, n + 1) / span, span, v)


def gaf_from_polar(polar):
    """GAF via the outer-product identity cos(a+b) = cos a cos b - sin a sin b."""
    v = polar.cosines
    s = np.sqrt(np.maximum(1.0 - v * v, 0.0))
    g = np.outer(v, v) - np.outer(s, s)
    upper = np.triu(g)
    g = upper + np.triu(g, 1).T
    return GafMatrix(g)


def encode_values(values):
    return gaf_from_polar(to_polar(normalize_series(values)))


def encode_road_day(series):
    """GAF of one :class:`~netpart.ingest.DailySeries` (or a raw value vector)."""
    values = getattr(series, "values", series)
    return encode_values(values)


def paa_downsample(values, target_length):
    """Piecewise aggregate approximation by equal block means."""
    v = np.asarray(values, dtype=np.float64)
    if target_length < 1 or len(v) % target_length:
        raise NotDivisible(f"target length {target_length} does not divide {len(v)}")
    return v.reshape(target_length, -1).mean(axis=1)


def recover_normalized(gaf, angles):
    """Rebuild rescaled values from the GAF diagonal, using the angles for sign."""
    mag = np.sqrt(np.maximum((np.diag(gaf.data) + 1.0) / 2.0, 0.0))
    return np.where(np.asarray(angles) <= np.pi / 2, mag, -mag)


# GAF dump: "GAF1", u32 n, then n*n little-endian float64, row-major.
MAGIC = b"GAF1"


def write_gaf(gaf, path):
    data = gaf.data if isinstance(gaf, GafMatrix) else np.asarray(gaf)
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<I", data.shape[0]))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_gaf(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC or len(blob) < 8:
        raise ValueError(f"{path}: not a GAF1 file")
    (n,) = struct.unpack_from("<I", blob, 4)
    if len(blob) != 8 + 8 * n * n:
        raise ValueError(f"{path}: expected {n}x{n} payload")
    return GafMatrix(np.frombuffer(blob, "<f8", n * n, 8).reshape(n, n).astype(np.float64))
