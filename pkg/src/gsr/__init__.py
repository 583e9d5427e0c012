"""Graph signal recovery toolkit.

Train small node classifiers on clean graph data, fit Gaussian-Bernoulli
RBMs on chosen layer representations, and recover predictions on distorted
inputs by reconstructing those representations and re-injecting them into
the network. Includes the noise-injection operators and the accuracy-grid
evaluation harness used to benchmark the approach.
"""

from .graph import Graph, SplitMasks, generate_sbm_graph, load_graph, normalize_adjacency
from .nn import DnnClassifier, DnnModel, TrainConfig, train_dnn
from .node2vec import Node2VecEmbedding, WalkConfig, compose_features
from .rbm import GaussianBernoulliRBM, RbmTrainConfig, Scaler, train_rbm
from .distortion import (NoisePlan, NoiseSpec, blank_adjacency, blank_features,
                         corrupt_adjacency, corrupt_features)
from .pipeline import DenoisingPipeline
from .evaluation import AccuracyGrid, accuracy, export_report, run_grid
from .tsne import EmbeddingSnapshot, ExactTSNE, tsne_embed

__version__ = "0.1.0"

__all__ = [
    "Graph", "SplitMasks", "generate_sbm_graph", "load_graph",
    "normalize_adjacency",
    "DnnClassifier", "DnnModel", "TrainConfig", "train_dnn",
    "Node2VecEmbedding", "WalkConfig", "compose_features",
    "GaussianBernoulliRBM", "RbmTrainConfig", "Scaler", "train_rbm",
    "NoisePlan", "NoiseSpec", "blank_adjacency", "blank_features",
    "corrupt_adjacency", "corrupt_features",
    "DenoisingPipeline",
    "AccuracyGrid", "accuracy", "export_report", "run_grid",
    "EmbeddingSnapshot", "ExactTSNE", "tsne_embed",
    "__version__",
]
