"""Forward primitives for the 3-layer classifier networks.

Every function here is pure: state updates (batch-norm running statistics)
are returned, never applied in place, so inference stays referentially
transparent.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import ArgumentError, DimensionError
from ..graph import Graph, mean_aggregator
from .model import BatchNormState


def dense_forward(X: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map XW + b with b broadcast across rows."""
    if X.shape[1] != W.shape[0]:
        raise DimensionError(f"X has {X.shape[1]} cols but W expects {W.shape[0]}")
    if b.shape[-1] != W.shape[1]:
        raise DimensionError(f"bias length {b.shape[-1]} != {W.shape[1]} outputs")
    return X @ W + b


def gcn_forward(H: np.ndarray, A_norm: sp.spmatrix, W: np.ndarray,
                b: np.ndarray) -> np.ndarray:
    """Graph convolution (A_norm @ H) W + b with a precomputed normalized adjacency."""
    if A_norm.shape[0] != H.shape[0]:
        raise DimensionError(f"A_norm is {A_norm.shape[0]}x{A_norm.shape[1]} "
                             f"but H has {H.shape[0]} rows")
    return dense_forward(A_norm @ H, W, b)


def sage_forward(H: np.ndarray, graph: Graph, W_self: np.ndarray,
                 W_neigh: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Skip connection plus neighbor mean: H W_self + mean_N(H) W_neigh + b.

    Neighborhoods come from the symmetrized graph; empty neighborhoods
    contribute a zero mean term.
    """
    if W_self.shape != W_neigh.shape:
        raise DimensionError("W_self and W_neigh must have identical shapes")
    M = mean_aggregator(graph)
    if M.shape[0] != H.shape[0]:
        raise DimensionError(f"graph has {M.shape[0]} nodes but H has {H.shape[0]} rows")
    return dense_forward(H, W_self, b) + (M @ H) @ W_neigh


def batchnorm_forward(Z: np.ndarray, state: BatchNormState, mode: str = "infer",
                      ) -> tuple[np.ndarray, BatchNormState]:
    """Batch normalization; returns (output, state after the call).

    Train mode normalizes by the batch moments (biased variance) and folds
    them into the running statistics with the state's momentum as the
    new-observation weight. Infer mode uses the running statistics and
    leaves the state untouched.
    """
    if Z.shape[1] != state.gamma.size:
        raise DimensionError(f"Z has {Z.shape[1]} features, state expects "
                             f"{state.gamma.size}")
    if mode == "infer":
        xhat = (Z - state.running_mean) / np.sqrt(state.running_var + state.epsilon)
        return xhat * state.gamma + state.beta, state
    if mode != "train":
        raise ArgumentError(f"unknown batchnorm mode {mode!r}")
    if Z.shape[0] < 2:
        raise ArgumentError("train-mode batchnorm needs at least 2 rows")
    mean = Z.mean(axis=0)
    var = Z.var(axis=0)
    xhat = (Z - mean) / np.sqrt(var + state.epsilon)
    m = state.momentum
    new_state = BatchNormState(
        gamma=state.gamma, beta=state.beta,
        running_mean=(1 - m) * state.running_mean + m * mean,
        running_var=(1 - m) * state.running_var + m * var,
        momentum=state.momentum, epsilon=state.epsilon,
    )
    return xhat * state.gamma + state.beta, new_state


def activation_forward(Z: np.ndarray, dropout_p: float, mode: str = "infer",
                       seed=None) -> tuple[np.ndarray, np.ndarray]:
    """ReLU followed by inverted dropout; returns (output, multiplier mask).

    The mask holds the factor applied after ReLU (0 for dropped entries,
    1/(1-p) for survivors, 1 everywhere at inference) so the backward pass
    can reuse it directly.
    """
    R = np.maximum(Z, 0.0)
    if mode == "infer" or dropout_p == 0.0:
        return R, np.ones_like(R)
    if mode != "train":
        raise ArgumentError(f"unknown activation mode {mode!r}")
    rng = np.random.default_rng(seed)
    keep = rng.random(R.shape) >= dropout_p
    mask = keep / (1.0 - dropout_p)
    return R * mask, mask


def log_softmax(Z: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax with max subtraction for overflow safety."""
    shifted = Z - Z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def log_softmax_nll(Z3: np.ndarray, labels: np.ndarray,
                    mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over the masked rows, plus all log-probs."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ArgumentError("mask must be non-empty")
    log_probs = log_softmax(Z3)
    picked = log_probs[mask, np.asarray(labels, dtype=np.int64)[mask]]
    return float(-picked.mean()), log_probs
