"""Higher-order graph attention: k-hop sampling, multi-hop attention models
and the experiment harness around them."""

from .graph import Dataset, Graph, LabeledSplit, branching_factor, build_graph, load_dataset, preprocess_features
from .khop import KHopEdgeSet, bfs_distances, build_khop_edges, khop_neighbors
from .models import GrandConfig, HogaConfig, HogaGAT, HogaGRAND, beta, parameter_count, prepare_edges
from .sampler import HeadSampleSet, SampleSet, SamplerConfig, baseline_sample, heuristic_walk_sample, sample_heads
from .train import TrainConfig, TrainReport, accuracy, aggregate_runs, dirichlet_energy, train, wilcoxon_signed_rank

__all__ = [
    "Dataset",
    "Graph",
    "LabeledSplit",
    "branching_factor",
    "build_graph",
    "load_dataset",
    "preprocess_features",
    "KHopEdgeSet",
    "bfs_distances",
    "build_khop_edges",
    "khop_neighbors",
    "GrandConfig",
    "HogaConfig",
    "HogaGAT",
    "HogaGRAND",
    "beta",
    "parameter_count",
    "prepare_edges",
    "HeadSampleSet",
    "SampleSet",
    "SamplerConfig",
    "baseline_sample",
    "heuristic_walk_sample",
    "sample_heads",
    "TrainConfig",
    "TrainReport",
    "accuracy",
    "aggregate_runs",
    "dirichlet_energy",
    "train",
    "wilcoxon_signed_rank",
]

__version__ = "0.1.0"
