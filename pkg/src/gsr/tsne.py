"""Exact t-SNE for 2-D snapshots of layer representations.

O(n^2) affinities, per-point bandwidths found by bisection on the
conditional entropy, symmetrized P, Student-t low-dimensional kernel,
gradient descent with momentum 0.5 rising to 0.8 at iteration 250, and
12x early exaggeration over the first 250 iterations. Inputs wider than 50
columns are reduced to 50 principal components first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ArgumentError
from .validation import as_matrix

EPS = np.finfo(np.float64).eps

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
ENTROPY_TOL = 1e-4


def _pairwise_sq_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def _entropy_and_probs(d_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Shannon entropy (nats) and probabilities of one conditional Gaussian."""
    logits = -d_row * beta
    logits -= logits.max()
    p = np.exp(logits)
    total = p.sum()
    if total <= 0:
        return 0.0, np.full_like(d_row, 1.0 / max(d_row.size, 1))
    p /= total
    nz = p > 0
    entropy = float(-(p[nz] * np.log(p[nz])).sum())
    return entropy, p


def conditional_affinities(D: np.ndarray, perplexity: float,
                           max_steps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Per-row bandwidth bisection so each conditional entropy hits log(perplexity).

    Returns (P_conditional with zero diagonal, betas).
    """
    n = D.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    betas = np.ones(n)
    idx = np.arange(n)
    for i in range(n):
        others = idx != i
        d = D[i, others]
        beta, lo, hi = 1.0, 0.0, np.inf
        entropy, p = _entropy_and_probs(d, beta)
        for _ in range(max_steps):
            if abs(entropy - target) <= ENTROPY_TOL:
                break
            if entropy > target:        # too spread out: sharpen
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
            entropy, p = _entropy_and_probs(d, beta)
        P[i, others] = p
        betas[i] = beta
    return P, betas


def joint_affinities(X: np.ndarray, perplexity: float) -> tuple[np.ndarray, np.ndarray]:
    n = X.shape[0]
    if perplexity < 2:
        raise ArgumentError("perplexity must be >= 2")
    if n < 3 * perplexity:
        raise ArgumentError(f"need at least 3*perplexity={3 * perplexity:.0f} rows, "
                            f"got {n}")
    cond, betas = conditional_affinities(_pairwise_sq_distances(X), perplexity)
    P = (cond + cond.T) / (2.0 * n)
    return np.maximum(P, EPS * 1e-3), betas


def kl_divergence_and_grad(P: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(P || Q) under the Student-t kernel and its gradient in Y."""
    D = _pairwise_sq_distances(Y)
    num = 1.0 / (1.0 + D)
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), EPS)
    mask = ~np.eye(P.shape[0], dtype=bool)
    kl = float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))
    PQ = (P - Q) * num
    grad = 4.0 * ((np.diag(PQ.sum(axis=1)) - PQ) @ Y)
    return kl, grad


def pca_reduce(X: np.ndarray, n_components: int = 50) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    return Xc @ Vt[:n_components].T


class ExactTSNE(BaseEstimator):
    """2-D embedding by exact t-SNE.

    learning_rate=None picks max(n / (4 * exaggeration), 50), which keeps
    the early exaggeration phase stable across dataset sizes.

    Fitted attributes: embedding_ (n x 2), betas_ (per-point precisions),
    kl_history_ (KL against the unexaggerated P before the first update and
    after every iteration).
    """

    def __init__(self, perplexity: float = 30.0, iterations: int = 1000,
                 learning_rate: float | None = None, seed: int = 0):
        self.perplexity = perplexity
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.seed = seed

    def fit_transform(self, X: np.ndarray, y=None) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] > 50:
            X = pca_reduce(X, 50)
        P, self.betas_ = joint_affinities(X, float(self.perplexity))
        lr = self.learning_rate
        if lr is None:
            lr = max(X.shape[0] / (4.0 * EXAGGERATION), 50.0)

        rng = np.random.default_rng(self.seed)
        Y = 1e-4 * rng.standard_normal((X.shape[0], 2))
        velocity = np.zeros_like(Y)
        kl, _ = kl_divergence_and_grad(P, Y)
        self.kl_history_ = [kl]
        for it in range(self.iterations):
            exaggerate = it < EXAGGERATION_ITERS
            momentum = MOMENTUM_EARLY if it < EXAGGERATION_ITERS else MOMENTUM_LATE
            _, grad = kl_divergence_and_grad(P * EXAGGERATION if exaggerate else P, Y)
            velocity = momentum * velocity - lr * grad
            Y = Y + velocity
            kl, _ = kl_divergence_and_grad(P, Y)
            self.kl_history_.append(kl)
        self.embedding_ = Y
        return Y


def tsne_embed(Z: np.ndarray, perplexity: float = 30.0, iterations: int = 1000,
               lr: float | None = None, seed: int = 0) -> np.ndarray:
    return ExactTSNE(perplexity, iterations, lr, seed).fit_transform(Z)


@dataclass
class EmbeddingSnapshot:
    """One 2-D projection of a tap's representation for the report."""

    tap: int
    variant: str                 # "desired" | "noisy" | "denoised"
    coords: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["tap,variant,x,y,label"]
        for (x, y), lab in zip(self.coords, self.labels):
            lines.append(f"{self.tap},{self.variant},{x:.6g},{y:.6g},{int(lab)}")
        return "\n".join(lines) + "\n"
