"""Partition road networks into connected, internally homogeneous sub-networks.

Pipeline: daily speed series -> Gramian Angular Field images -> convolutional
autoencoder features -> adjacency-constrained agglomerative clustering, with
a spectral-clustering baseline and intra/inter evaluation metrics.
"""

from .clustering import (
    ClusterSet,
    MergeTrace,
    hierarchical_partition,
    hierarchical_sweep,
    linkage_distance,
    similarity,
    spectral_partition,
)
from .gaf import GafMatrix, encode_road_day, gaf_from_polar, normalize_series, paa_downsample, to_polar
from .graph import RoadGraph, build_graph, clusters_adjacent, connected_components
from .ingest import DailySeries, SpeedRecord, assemble_series, impute_missing, parse_records
from .metrics import MetricsReport, compare, evaluate, inter, intra, network_intra
from .neuralnet import AutoencoderModel, ConvLayer, TrainConfig, extract_features, train
from .synth import SynthScenario, adjusted_rand_index, generate, tidal_pair

__version__ = "0.1.0"
