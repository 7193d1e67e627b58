"""Glue between stages: series -> GAF stack -> features -> partitions."""

from __future__ import annotations

import numpy as np

from .errors import ConstantSeries
from .gaf import encode_values, paa_downsample
from .neuralnet import AutoencoderModel, TrainConfig, extract_features_batched, train


def series_values(day, roads):
    """``(n_roads, slots)`` array of speed values in ``roads`` order."""
    return np.array([np.asarray(getattr(day[r], "values", day[r]), dtype=np.float64) for r in roads])


def gaf_stack(values, paa=None):
    """GAF images for each row of ``values``.

    Returns ``(images, kept, excluded)`` where ``kept`` / ``excluded`` are
    row indices; constant rows cannot be rescaled and are excluded.
    """
    images, kept, excluded = [], [], []
    for i, v in enumerate(values):
        if paa:
            v = paa_downsample(v, paa)
        try:
            images.append(encode_values(v).data)
        except ConstantSeries:
            excluded.append(i)
            continue
        kept.append(i)
    size = len(values[0]) if not paa else paa
    return (np.array(images) if images else np.zeros((0, size, size))), kept, excluded


def train_autoencoder(images, config=None, model_seed=None):
    config = config or TrainConfig()
    seed = config.seed if model_seed is None else model_seed
    model = AutoencoderModel.build(images.shape[-1], seed=seed)
    result = train(model, images, config)
    return model, result.losses


def ae_features(day, roads, paa=72, config=None):
    """Train an autoencoder on one day's GAFs and return ``(features, model, losses)``.

    ``features`` maps road id to its pooled encoder vector.
    """
    images, kept, excluded = gaf_stack(series_values(day, roads), paa)
    if excluded:
        raise ConstantSeries(f"constant series for roads {[roads[i] for i in excluded][:5]}")
    model, losses = train_autoencoder(images, config)
    feats = extract_features_batched(model, images)
    return {roads[i]: feats[j] for j, i in enumerate(kept)}, model, losses
