"""Biased random walks and skip-gram embeddings for the embedding-concat baseline.

Walks follow the usual second-order scheme: from the previous step t at the
current node v, a candidate x is weighted 1/p when it returns to t, 1 when
x also neighbors t, and 1/q otherwise. Embeddings are trained with negative
sampling over a unigram^0.75 table. Everything is computed on the clean
training-time graph; isolated nodes produce no walks and keep zero rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator

from .errors import ArgumentError, StateError
from .graph import Graph, symmetrized_adjacency
from .serialize import read_container, write_container

EMBEDDING_MAGIC = b"GSRE"


@dataclass
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 40
    p: float = 1.0
    q: float = 1.0
    window: int = 5
    embedding_dim: int = 64
    negatives: int = 5
    epochs: int = 1
    lr: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ArgumentError("p and q must be positive")
        if self.walk_length < 2:
            raise ArgumentError("walk_length must be >= 2")
        if self.embedding_dim < 1:
            raise ArgumentError("embedding_dim must be >= 1")


@numba.njit(cache=True)
def _walk_kernel(indptr, indices, starts, seeds, walk_length, p, q,
                 out):  # pragma: no cover - exercised via generate_walks
    max_deg = 0
    for i in range(indptr.size - 1):
        deg = indptr[i + 1] - indptr[i]
        if deg > max_deg:
            max_deg = deg
    cum = np.empty(max_deg)
    for w in range(starts.size):
        np.random.seed(seeds[w])
        prev = np.int64(-1)
        cur = starts[w]
        out[w, 0] = cur
        for step in range(1, walk_length):
            lo, hi = indptr[cur], indptr[cur + 1]
            deg = hi - lo
            if deg == 0:
                break
            if prev < 0 or (p == 1.0 and q == 1.0):
                nxt = indices[lo + np.random.randint(0, deg)]
            else:
                plo, phi = indptr[prev], indptr[prev + 1]
                total = 0.0
                for k in range(deg):
                    x = indices[lo + k]
                    if x == prev:
                        weight = 1.0 / p
                    else:
                        # distance-1 test: binary search prev's sorted row
                        a, b = plo, phi
                        found = False
                        while a < b:
                            mid = (a + b) // 2
                            if indices[mid] < x:
                                a = mid + 1
                            elif indices[mid] > x:
                                b = mid
                            else:
                                found = True
                                break
                        weight = 1.0 if found else 1.0 / q
                    total += weight
                    cum[k] = total
                r = np.random.random() * total
                k = 0
                while k < deg - 1 and cum[k] <= r:
                    k += 1
                nxt = indices[lo + k]
            out[w, step] = nxt
            prev = cur
            cur = nxt


def generate_walks(graph: Graph, cfg: WalkConfig,
                   skipped: list | None = None) -> list[np.ndarray]:
    """walks_per_node biased walks from every non-isolated node.

    Walks truncate early at dead ends. Isolated start nodes are recorded in
    `skipped` (when given) instead of erroring, since adjacency blanking can
    isolate nodes mid-experiment. Each walk draws from its own seed stream
    derived from (seed, node, walk index), so generation order never matters.
    """
    A = symmetrized_adjacency(graph)
    A.sort_indices()
    degrees = np.diff(A.indptr)
    if skipped is not None:
        skipped.extend(np.flatnonzero(degrees == 0).tolist())
    live = np.flatnonzero(degrees > 0).astype(np.int64)
    if live.size == 0:
        return []
    starts = np.repeat(live, cfg.walks_per_node)
    walk_ids = np.tile(np.arange(cfg.walks_per_node), live.size)
    seeds = np.array(
        [np.random.SeedSequence((cfg.seed, int(n), int(w))).generate_state(1)[0]
         for n, w in zip(starts, walk_ids)], dtype=np.uint32)
    out = np.full((starts.size, cfg.walk_length), -1, dtype=np.int64)
    _walk_kernel(A.indptr.astype(np.int64), A.indices.astype(np.int64),
                 starts, seeds, cfg.walk_length, float(cfg.p), float(cfg.q), out)
    lengths = (out >= 0).sum(axis=1)
    return [out[i, :lengths[i]] for i in range(starts.size)]


def _skipgram_pairs(walks: list[np.ndarray], window: int) -> tuple[np.ndarray, np.ndarray]:
    """All ordered (center, context) pairs within the window, across all walks."""
    length = max(w.size for w in walks)
    padded = np.full((len(walks), length), -1, dtype=np.int64)
    for i, w in enumerate(walks):
        padded[i, :w.size] = w
    centers, contexts = [], []
    for d in range(1, window + 1):
        if d >= length:
            break
        a, b = padded[:, :-d], padded[:, d:]
        valid = b >= 0   # pads sit only at the tail, so a is valid wherever b is
        centers.append(a[valid])
        contexts.append(b[valid])
        centers.append(b[valid])
        contexts.append(a[valid])
    return np.concatenate(centers), np.concatenate(contexts)


@numba.njit(cache=True)
def _sgns_epoch(W_in, W_out, centers, contexts, order, neg_cdf, negatives,
                lr, seed):  # pragma: no cover - exercised via train_skipgram
    np.random.seed(seed)
    dim = W_in.shape[1]
    g_in = np.empty(dim)
    for ii in range(order.size):
        pair = order[ii]
        c = centers[pair]
        o = contexts[pair]
        g_in[:] = 0.0
        for t in range(negatives + 1):
            if t == 0:
                tgt, label = o, 1.0
            else:
                tgt, label = np.searchsorted(neg_cdf, np.random.random()), 0.0
            s = 0.0
            for j in range(dim):
                s += W_in[c, j] * W_out[tgt, j]
            if s > 35.0:
                sig = 1.0
            elif s < -35.0:
                sig = 0.0
            else:
                sig = 1.0 / (1.0 + np.exp(-s))
            g = lr * (sig - label)
            for j in range(dim):
                g_in[j] += g * W_out[tgt, j]
                W_out[tgt, j] -= g * W_in[c, j]
        for j in range(dim):
            W_in[c, j] -= g_in[j]


def train_skipgram(walks: list[np.ndarray], num_nodes: int,
                   cfg: WalkConfig) -> np.ndarray:
    """Skip-gram with negative sampling over all windowed walk pairs.

    Per-pair sequential stochastic updates (compiled inner loop), negatives
    drawn from the walk-frequency unigram distribution raised to 0.75. Nodes
    that never appear in a walk keep all-zero rows.
    """
    if not walks:
        raise ArgumentError("walks must be non-empty")
    rng = np.random.default_rng((cfg.seed, 0x5649))
    counts = np.zeros(num_nodes, dtype=np.float64)
    for walk in walks:
        np.add.at(counts, walk, 1.0)
    visited = counts > 0

    table = counts ** 0.75
    neg_cdf = np.cumsum(table / table.sum())
    neg_cdf[-1] = 1.0

    W_in = (rng.random((num_nodes, cfg.embedding_dim)) - 0.5) / cfg.embedding_dim
    W_in[~visited] = 0.0
    W_out = np.zeros((num_nodes, cfg.embedding_dim))
    if cfg.epochs == 0:
        return W_in

    centers, contexts = _skipgram_pairs(walks, cfg.window)
    for _ in range(cfg.epochs):
        order = rng.permutation(centers.size)
        epoch_seed = int(rng.integers(0, 2 ** 31 - 1))
        _sgns_epoch(W_in, W_out, centers, contexts, order, neg_cdf,
                    cfg.negatives, cfg.lr, epoch_seed)
    return W_in


def compose_features(X: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Column-wise concatenation [X | E] of raw features and embeddings."""
    X = np.asarray(X, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    if X.shape[0] != E.shape[0]:
        raise ArgumentError(f"row mismatch: X has {X.shape[0]}, E has {E.shape[0]}")
    return np.hstack([X, E])


def save_embeddings(E: np.ndarray, path) -> None:
    write_container(path, EMBEDDING_MAGIC, {"embeddings": E})


def load_embeddings(path) -> np.ndarray:
    return read_container(path, EMBEDDING_MAGIC)["embeddings"]


class Node2VecEmbedding(BaseEstimator):
    """Estimator wrapper: fit() learns node embeddings, transform() concatenates.

    After fitting, embeddings_ holds the (num_nodes x embedding_dim) matrix
    and skipped_nodes_ lists isolated nodes (zero rows).
    """

    def __init__(self, walks_per_node: int = 10, walk_length: int = 40,
                 p: float = 1.0, q: float = 1.0, window: int = 5,
                 embedding_dim: int = 64, negatives: int = 5, epochs: int = 1,
                 lr: float = 0.025, seed: int = 0):
        self.walks_per_node = walks_per_node
        self.walk_length = walk_length
        self.p = p
        self.q = q
        self.window = window
        self.embedding_dim = embedding_dim
        self.negatives = negatives
        self.epochs = epochs
        self.lr = lr
        self.seed = seed

    def _config(self) -> WalkConfig:
        return WalkConfig(self.walks_per_node, self.walk_length, self.p, self.q,
                          self.window, self.embedding_dim, self.negatives,
                          self.epochs, self.lr, self.seed)

    def fit(self, graph: Graph):
        cfg = self._config()
        skipped: list = []
        walks = generate_walks(graph, cfg, skipped=skipped)
        if walks:
            self.embeddings_ = train_skipgram(walks, graph.num_nodes, cfg)
        else:
            self.embeddings_ = np.zeros((graph.num_nodes, cfg.embedding_dim))
        self.skipped_nodes_ = skipped
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "embeddings_"):
            raise StateError("embedding model is not fitted")
        return compose_features(X, self.embeddings_)
