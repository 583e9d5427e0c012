"""Train-mode forward pass with cached intermediates and manual backpropagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import StateError
from ..graph import Graph, mean_aggregator, normalize_adjacency
from .layers import batchnorm_forward, log_softmax_nll
from .model import DnnModel


@dataclass
class Propagation:
    """Precomputed message-passing operators for one graph and architecture."""

    kind: str                       # "dense" | "gcn" | "sage"
    A: sp.csr_matrix | None = None  # normalized adjacency with self loops
    M: sp.csr_matrix | None = None  # row-stochastic neighbor mean


def prepare_propagation(arch: str, graph: Graph | None) -> Propagation:
    if arch in ("mlp", "n2v"):
        return Propagation("dense")
    if graph is None:
        raise StateError(f"architecture {arch!r} needs a graph")
    if arch == "gcn":
        return Propagation("gcn", A=normalize_adjacency(graph, add_self_loops=True))
    return Propagation("sage", M=mean_aggregator(graph))


def linear_layer(prop: Propagation, model: DnnModel, H: np.ndarray,
                 W: np.ndarray, b: np.ndarray) -> np.ndarray:
    if prop.kind == "dense":
        return H @ W + b
    if prop.kind == "gcn":
        return (prop.A @ H) @ W + b
    W_self, W_neigh = model.sage_blocks(W)
    return H @ W_self + (prop.M @ H) @ W_neigh + b


@dataclass
class LayerCache:
    H_in: np.ndarray                 # layer input
    MH: np.ndarray | None            # aggregated input (sage only)
    xhat: np.ndarray | None = None   # normalized pre-activation
    inv_std: np.ndarray | None = None
    gate: np.ndarray | None = None   # ReLU derivative
    mask: np.ndarray | None = None   # dropout multiplier


@dataclass
class ForwardCache:
    prop: Propagation
    layers: list
    log_probs: np.ndarray
    labels: np.ndarray
    mask: np.ndarray
    loss: float


def forward_train(model: DnnModel, prop: Propagation, X0: np.ndarray,
                  labels: np.ndarray, mask: np.ndarray,
                  dropout_seed) -> ForwardCache:
    """Full train-mode pass; batch-norm running stats are updated on the model.

    Dropout masks are drawn from seeds derived per layer from dropout_seed,
    so re-running with identical parameters reproduces the pass bit for bit.
    """
    layers = []
    H = X0
    weights = [(model.W1, model.b1), (model.W2, model.b2), (model.W3, model.b3)]
    bns = [model.bn1, model.bn2]
    for idx, (W, b) in enumerate(weights, start=1):
        cache = LayerCache(H_in=H, MH=prop.M @ H if prop.kind == "sage" else None)
        Z = linear_layer(prop, model, H, W, b)
        if idx < 3:
            bn = bns[idx - 1]
            A, new_bn = batchnorm_forward(Z, bn, mode="train")
            bn.running_mean = new_bn.running_mean
            bn.running_var = new_bn.running_var
            mean, var = Z.mean(axis=0), Z.var(axis=0)
            cache.inv_std = 1.0 / np.sqrt(var + bn.epsilon)
            cache.xhat = (Z - mean) * cache.inv_std
            cache.gate = (A > 0).astype(np.float64)
            R = np.maximum(A, 0.0)
            if model.dropout_p > 0.0:
                rng = np.random.default_rng((dropout_seed, idx))
                keep = rng.random(R.shape) >= model.dropout_p
                cache.mask = keep / (1.0 - model.dropout_p)
            else:
                cache.mask = np.ones_like(R)
            H = R * cache.mask
        layers.append(cache)
    loss, log_probs = log_softmax_nll(Z, labels, mask)
    return ForwardCache(prop, layers, log_probs, labels, mask, loss)


def _linear_backward(prop: Propagation, model: DnnModel, cache: LayerCache,
                     W: np.ndarray, dZ: np.ndarray):
    """Gradients of one linear layer; aggregation backward uses the operator transpose."""
    db = dZ.sum(axis=0)
    if prop.kind == "dense":
        return cache.H_in.T @ dZ, db, dZ @ W.T
    if prop.kind == "gcn":
        P = prop.A @ cache.H_in
        return P.T @ dZ, db, prop.A.T @ (dZ @ W.T)
    W_self, W_neigh = model.sage_blocks(W)
    dW = np.vstack([cache.H_in.T @ dZ, cache.MH.T @ dZ])
    dH = dZ @ W_self.T + prop.M.T @ (dZ @ W_neigh.T)
    return dW, db, dH


def _batchnorm_backward(cache: LayerCache, gamma: np.ndarray, dA: np.ndarray):
    n = dA.shape[0]
    dgamma = (dA * cache.xhat).sum(axis=0)
    dbeta = dA.sum(axis=0)
    dxhat = dA * gamma
    dZ = (dxhat - dxhat.mean(axis=0)
          - cache.xhat * (dxhat * cache.xhat).sum(axis=0) / n) * cache.inv_std
    return dZ, dgamma, dbeta


def backward_pass(model: DnnModel, cache: ForwardCache) -> dict[str, np.ndarray]:
    """Loss gradients for every trainable parameter, from a matching forward_train."""
    if cache.layers is None or len(cache.layers) != 3:
        raise StateError("forward intermediates missing or stale")
    n_masked = cache.mask.size
    probs = np.exp(cache.log_probs)
    dZ = np.zeros_like(probs)
    rows = np.asarray(cache.mask, dtype=np.int64)
    dZ[rows] = probs[rows]
    dZ[rows, np.asarray(cache.labels, dtype=np.int64)[rows]] -= 1.0
    dZ /= n_masked

    grads: dict[str, np.ndarray] = {}
    weights = [("W1", "b1", model.W1), ("W2", "b2", model.W2), ("W3", "b3", model.W3)]
    bns = [("gamma1", "beta1", model.bn1), ("gamma2", "beta2", model.bn2)]
    for idx in (3, 2, 1):
        wname, bname, W = weights[idx - 1]
        dW, db, dH = _linear_backward(cache.prop, model, cache.layers[idx - 1], W, dZ)
        grads[wname], grads[bname] = dW, db
        if idx == 1:
            break
        prev = cache.layers[idx - 2]
        dR = dH * prev.mask
        dA = dR * prev.gate
        gname, bename, bn = bns[idx - 2]
        dZ, grads[gname], grads[bename] = _batchnorm_backward(prev, bn.gamma, dA)
    return grads


def training_loss(model: DnnModel, prop: Propagation, X0: np.ndarray,
                  labels: np.ndarray, mask: np.ndarray, dropout_seed) -> float:
    """Loss of a train-mode pass without disturbing batch-norm running stats."""
    saved = (model.bn1.running_mean.copy(), model.bn1.running_var.copy(),
             model.bn2.running_mean.copy(), model.bn2.running_var.copy())
    cache = forward_train(model, prop, X0, labels, mask, dropout_seed)
    model.bn1.running_mean, model.bn1.running_var = saved[0], saved[1]
    model.bn2.running_mean, model.bn2.running_var = saved[2], saved[3]
    return cache.loss
