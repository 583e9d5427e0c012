"""Inference-mode staged forward pass with representation taps.

The chain runs linear -> batch norm (running stats) -> ReLU for the two
hidden blocks and a final linear into log-softmax, capturing each pre-norm
representation on the way. A captured representation can be swapped for a
substitute before the chain continues, which is how the denoising pipeline
re-injects reconstructions. Dropout is always off here, so repeated calls
are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DimensionError
from ..graph import Graph
from .backprop import Propagation, linear_layer, prepare_propagation
from .layers import batchnorm_forward, log_softmax
from .model import DnnModel

TAPS = (0, 1, 2, 3)


@dataclass
class InferenceResult:
    taps: dict[int, np.ndarray]
    log_probs: np.ndarray
    predictions: np.ndarray


def input_features(model: DnnModel, graph: Graph) -> np.ndarray:
    """Model input rows; the embedding-concat architecture appends stored columns."""
    X = graph.features
    if model.arch == "n2v":
        if model.embeddings is None:
            raise DimensionError("embedding-concat model has no stored embeddings")
        if model.embeddings.shape[0] != X.shape[0]:
            raise DimensionError("stored embeddings row count does not match graph")
        X = np.hstack([X, model.embeddings])
    if X.shape[1] != model.input_dim:
        raise DimensionError(f"model expects {model.input_dim} input columns, "
                             f"got {X.shape[1]}")
    return X


def run_stages(model: DnnModel, prop: Propagation, X0: np.ndarray,
               replace_at: int | None = None,
               replace: Callable[[np.ndarray], np.ndarray] | None = None,
               ) -> InferenceResult:
    """Run the chain, optionally substituting the representation at one tap.

    Taps earlier than the substitution point hold the values computed from
    X0; the substituted tap holds the replacement; later taps are recomputed
    downstream of it.
    """

    def maybe_replace(tap: int, Z: np.ndarray) -> np.ndarray:
        if replace_at == tap:
            Z = np.asarray(replace(Z), dtype=np.float64)
        return Z

    taps: dict[int, np.ndarray] = {}
    taps[0] = maybe_replace(0, X0)
    Z1 = linear_layer(prop, model, taps[0], model.W1, model.b1)
    taps[1] = maybe_replace(1, Z1)
    H1, _ = batchnorm_forward(taps[1], model.bn1, mode="infer")
    H1 = np.maximum(H1, 0.0)
    Z2 = linear_layer(prop, model, H1, model.W2, model.b2)
    taps[2] = maybe_replace(2, Z2)
    H2, _ = batchnorm_forward(taps[2], model.bn2, mode="infer")
    H2 = np.maximum(H2, 0.0)
    Z3 = linear_layer(prop, model, H2, model.W3, model.b3)
    taps[3] = maybe_replace(3, Z3)
    log_probs = log_softmax(taps[3])
    return InferenceResult(taps, log_probs, np.argmax(log_probs, axis=1))


def forward_full(model: DnnModel, graph: Graph,
                 prop: Propagation | None = None) -> InferenceResult:
    """Plain inference pass: all four taps plus predictions, no substitution."""
    if prop is None:
        prop = prepare_propagation(model.arch, graph)
    return run_stages(model, prop, input_features(model, graph))


def extract_representations(model: DnnModel, graph: Graph, tap: int,
                            rows=None) -> np.ndarray:
    """One tap's representation, optionally restricted to the given node rows."""
    if tap not in TAPS:
        raise DimensionError(f"tap must be one of {TAPS}, got {tap}")
    Z = forward_full(model, graph).taps[tap]
    if rows is None:
        return Z
    rows = np.asarray(rows, dtype=np.int64)
    return Z[rows]
