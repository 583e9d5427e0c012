"""Full-batch training of the classifier networks on the clean train split."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import ArgumentError, StateError
from ..graph import Graph
from .backprop import backward_pass, forward_train, prepare_propagation
from .infer import forward_full, input_features
from .model import ARCHS, DnnModel, TrainConfig, init_model
from .optim import AdamState, adam_step, sgd_step


def train_dnn(graph: Graph, arch: str, cfg: TrainConfig,
              n2v_embeddings: np.ndarray | None = None,
              history: list | None = None) -> DnnModel:
    """Train on the graph's train mask and keep the best-validation checkpoint.

    Training is full batch and deterministic for a fixed seed: the weight
    init, every dropout mask, and the optimizer all draw from seeds derived
    from cfg.seed. The returned model is the epoch checkpoint with the
    highest validation accuracy (ties keep the earliest epoch); when the
    graph has no validation nodes the final epoch is returned.
    """
    if arch not in ARCHS:
        raise ArgumentError(f"unknown architecture {arch!r}")
    if graph.split.train.size == 0:
        raise ArgumentError("train mask is empty")
    if arch == "n2v":
        if n2v_embeddings is None:
            raise ArgumentError("the embedding-concat architecture needs embeddings")
        if n2v_embeddings.shape[0] != graph.num_nodes:
            raise ArgumentError("embeddings must have one row per node")

    input_dim = graph.feature_dim
    if arch == "n2v":
        input_dim += n2v_embeddings.shape[1]
    model = init_model(arch, input_dim, cfg.hidden_dim, graph.num_classes,
                       cfg.dropout_p, cfg.seed, embeddings=n2v_embeddings)
    model.train_config = cfg

    prop = prepare_propagation(arch, graph)
    X0 = input_features(model, graph)
    labels, train_mask = graph.labels, graph.split.train
    val_mask = graph.split.val

    opt_state = AdamState()
    best = model.copy()
    best_val = -1.0
    for epoch in range(cfg.epochs):
        cache = forward_train(model, prop, X0, labels, train_mask,
                              dropout_seed=(cfg.seed, epoch))
        grads = backward_pass(model, cache)
        params = model.parameters()
        if cfg.optimizer == "adam":
            adam_step(params, grads, opt_state, cfg.learning_rate, t=epoch + 1)
        else:
            sgd_step(params, grads, cfg.learning_rate)
        model.set_parameters(params)

        if val_mask.size:
            preds = forward_full(model, graph, prop).predictions
            val_acc = float((preds[val_mask] == labels[val_mask]).mean())
        else:
            val_acc = float("nan")
        if history is not None:
            history.append({"epoch": epoch, "train_loss": cache.loss,
                            "val_acc": val_acc})
        if val_mask.size and val_acc > best_val:
            best_val = val_acc
            best = model.copy()

    result = best if val_mask.size else model.copy()
    result.train_config = cfg
    return result


class DnnClassifier(BaseEstimator):
    """Node classifier over one of the four supported architectures.

    Parameters mirror the training configuration; fit() trains on the
    graph's train split and selects the best-validation epoch. For
    arch="n2v" pass the node embedding matrix to fit(); it is stored on the
    model and reused at prediction time regardless of later graph noise.
    """

    def __init__(self, arch: str = "mlp", hidden_dim: int = 64, epochs: int = 200,
                 learning_rate: float = 1e-3, dropout_p: float = 0.5,
                 optimizer: str = "adam", seed: int = 0):
        self.arch = arch
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.dropout_p = dropout_p
        self.optimizer = optimizer
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate,
                           dropout_p=self.dropout_p, hidden_dim=self.hidden_dim,
                           seed=self.seed, optimizer=self.optimizer)

    def fit(self, graph: Graph, embeddings: np.ndarray | None = None):
        history: list = []
        self.model_ = train_dnn(graph, self.arch, self._config(),
                                n2v_embeddings=embeddings, history=history)
        self.history_ = history
        return self

    def _check_fitted(self) -> DnnModel:
        if not hasattr(self, "model_"):
            raise StateError("classifier is not fitted")
        return self.model_

    def predict(self, graph: Graph) -> np.ndarray:
        return forward_full(self._check_fitted(), graph).predictions

    def score(self, graph: Graph, mask: np.ndarray | None = None) -> float:
        """Accuracy over the given node ids (defaults to the test split)."""
        if mask is None:
            mask = graph.split.test
        mask = np.asarray(mask, dtype=np.int64)
        if mask.size == 0:
            raise ArgumentError("mask must be non-empty")
        preds = self.predict(graph)
        return float((preds[mask] == graph.labels[mask]).mean())
