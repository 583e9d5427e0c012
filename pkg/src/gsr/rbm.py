"""Gaussian-Bernoulli restricted Boltzmann machine.

Visible units are real-valued with per-unit standard deviations, hidden
units are binary. The energy of a configuration (v, h) is

    E(v, h) = sum_i (v_i - b_v_i)^2 / (2 sigma_i^2)
            - sum_ij (v_i / sigma_i) W_ij h_j
            - sum_j b_h_j h_j

which gives a Gaussian conditional over each visible unit (mean
b_v_i + sigma_i * sum_j W_ij h_j, variance sigma_i^2) and a logistic
conditional for each hidden unit. Training is plain contrastive divergence
on standardized data with the sigmas pinned at one; the fitted scaler
absorbs the data scale instead, which sidesteps the instability of learning
visible variances. An RBM fitted to a set of patterns acts as an
associative memory: reconstruction slides a noisy input down the learned
energy surface toward the nearest stored pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ArgumentError, DimensionError, NumericError, StateError
from .serialize import read_container, write_container
from .validation import as_matrix

RBM_MAGIC = b"GSRR"

STD_FLOOR = 1e-6


@dataclass
class Scaler:
    """Per-dimension standardization with a floor on the standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, Z: np.ndarray) -> "Scaler":
        Z = as_matrix(Z, "Z")
        return cls(Z.mean(axis=0), np.maximum(Z.std(axis=0), STD_FLOOR))

    def transform(self, Z: np.ndarray) -> np.ndarray:
        return (Z - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.std + self.mean


@dataclass
class RbmTrainConfig:
    hidden_units: int = 256
    epochs: int = 100
    batch_size: int = 64
    cd_steps: int = 1
    lr: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.cd_steps < 1:
            raise ArgumentError("cd_steps must be >= 1")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ArgumentError("epochs must be >= 0")


def logistic(x: np.ndarray) -> np.ndarray:
    """Overflow-safe elementwise logistic, finite for any pre-activation."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class GaussianBernoulliRBM(BaseEstimator, TransformerMixin):
    """Associative memory over real-valued representations.

    fit() standardizes the input, trains by minibatch CD-k, and stores the
    scaler; transform()/reconstruct() denoise new rows by running Gibbs
    alternations and returning the final mean-field visible state in the
    original units.

    Fitted attributes: W_ (visible x hidden), b_v_, b_h_, sigma_, scaler_,
    reconstruction_errors_ (per epoch mean squared error).
    """

    def __init__(self, hidden_units: int = 256, epochs: int = 100,
                 batch_size: int = 64, cd_steps: int = 1, lr: float = 1e-2,
                 seed: int = 0, gibbs_rounds: int = 1):
        self.hidden_units = hidden_units
        self.epochs = epochs
        self.batch_size = batch_size
        self.cd_steps = cd_steps
        self.lr = lr
        self.seed = seed
        self.gibbs_rounds = gibbs_rounds

    # -- parameter access -------------------------------------------------

    @property
    def visible_dim(self) -> int:
        self._check_initialized()
        return self.W_.shape[0]

    def _check_initialized(self) -> None:
        if not hasattr(self, "W_"):
            raise StateError("RBM parameters are not initialized; call fit()")

    def initialize(self, n_visible: int, rng: np.random.Generator | None = None):
        """Fresh parameters: small Gaussian weights, zero biases, unit sigmas."""
        rng = rng or np.random.default_rng(self.seed)
        self.W_ = rng.normal(0.0, 0.01, size=(n_visible, self.hidden_units))
        self.b_v_ = np.zeros(n_visible)
        self.b_h_ = np.zeros(self.hidden_units)
        self.sigma_ = np.ones(n_visible)
        return self

    # -- energy and conditionals ------------------------------------------

    def energy(self, v: np.ndarray, h: np.ndarray) -> float:
        self._check_initialized()
        v = np.asarray(v, dtype=np.float64).ravel()
        h = np.asarray(h, dtype=np.float64).ravel()
        if v.size != self.W_.shape[0] or h.size != self.W_.shape[1]:
            raise DimensionError(f"expected ({self.W_.shape[0]}, {self.W_.shape[1]}) "
                                 f"units, got ({v.size}, {h.size})")
        quad = float(np.sum((v - self.b_v_) ** 2 / (2.0 * self.sigma_ ** 2)))
        cross = float((v / self.sigma_) @ self.W_ @ h)
        return quad - cross - float(self.b_h_ @ h)

    def hidden_probabilities(self, V: np.ndarray) -> np.ndarray:
        """P(h_j = 1 | v) = logistic(b_h_j + sum_i (v_i / sigma_i) W_ij)."""
        self._check_initialized()
        V = as_matrix(V, "V", cols=self.W_.shape[0])
        return logistic((V / self.sigma_) @ self.W_ + self.b_h_)

    def visible_from_hidden(self, H: np.ndarray, sample: bool = False,
                            rng: np.random.Generator | None = None) -> np.ndarray:
        """Conditional visible state: the Gaussian mean, or a draw around it."""
        self._check_initialized()
        H = as_matrix(H, "H", cols=self.W_.shape[1])
        mean = self.b_v_ + self.sigma_ * (H @ self.W_.T)
        if not sample:
            return mean
        rng = rng or np.random.default_rng()
        return mean + self.sigma_ * rng.standard_normal(mean.shape)

    # -- training ----------------------------------------------------------

    def cd_update(self, batch: np.ndarray, k: int | None = None,
                  lr: float | None = None,
                  rng: np.random.Generator | None = None) -> float:
        """One contrastive-divergence update in place; returns the batch MSE.

        Positive statistics use the data with hidden probabilities. The
        negative chain samples hidden states throughout and samples
        intermediate visibles, keeping only the final visible at its
        mean-field value. Sigmas stay fixed.
        """
        self._check_initialized()
        k = self.cd_steps if k is None else k
        lr = self.lr if lr is None else lr
        if k < 1:
            raise ArgumentError("cd steps must be >= 1")
        rng = rng or np.random.default_rng(self.seed)
        V0 = as_matrix(batch, "batch", cols=self.W_.shape[0])
        n = V0.shape[0]

        P0 = self.hidden_probabilities(V0)
        H = (rng.random(P0.shape) < P0).astype(np.float64)
        for step in range(k):
            last = step == k - 1
            Vk = self.visible_from_hidden(H, sample=not last, rng=rng)
            Pk = self.hidden_probabilities(Vk)
            if not last:
                H = (rng.random(Pk.shape) < Pk).astype(np.float64)

        inv_sigma = 1.0 / self.sigma_
        grad_W = ((V0 * inv_sigma).T @ P0 - (Vk * inv_sigma).T @ Pk) / n
        grad_bv = (V0.mean(axis=0) - Vk.mean(axis=0)) * inv_sigma ** 2
        grad_bh = P0.mean(axis=0) - Pk.mean(axis=0)

        self.W_ += lr * grad_W
        self.b_v_ += lr * grad_bv
        self.b_h_ += lr * grad_bh
        for name, arr in (("W", self.W_), ("b_v", self.b_v_), ("b_h", self.b_h_)):
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"RBM parameter {name} became non-finite")
        return float(np.mean((V0 - Vk) ** 2))

    def fit(self, Z: np.ndarray, y=None):
        Z = as_matrix(Z, "Z")
        if Z.shape[0] < self.batch_size:
            raise ArgumentError(f"need at least batch_size={self.batch_size} rows, "
                                f"got {Z.shape[0]}")
        self.scaler_ = Scaler.fit(Z)
        S = self.scaler_.transform(Z)
        rng = np.random.default_rng(self.seed)
        self.initialize(Z.shape[1], rng)
        self.reconstruction_errors_ = []
        for _ in range(self.epochs):
            order = rng.permutation(S.shape[0])
            errs = []
            for start in range(0, S.shape[0], self.batch_size):
                batch = S[order[start:start + self.batch_size]]
                errs.append(self.cd_update(batch, rng=rng))
            self.reconstruction_errors_.append(float(np.mean(errs)))
        return self

    # -- reconstruction -----------------------------------------------------

    def reconstruct(self, Z_noisy: np.ndarray, gibbs_rounds: int | None = None,
                    sample: bool = False, seed=None) -> np.ndarray:
        """Denoise rows: standardize, run Gibbs alternations, de-standardize.

        Default operation is fully mean-field (hidden probabilities both
        ways), making the output a pure function of the input. With
        sample=True, hidden states and intermediate visibles are sampled;
        the final visible is always the mean-field mean.
        """
        self._check_initialized()
        if not hasattr(self, "scaler_"):
            raise StateError("RBM has no fitted scaler; call fit()")
        rounds = self.gibbs_rounds if gibbs_rounds is None else gibbs_rounds
        if rounds < 1:
            raise ArgumentError("gibbs_rounds must be >= 1")
        Z = as_matrix(Z_noisy, "Z_noisy", cols=self.scaler_.mean.size)
        rng = np.random.default_rng(seed)
        V = self.scaler_.transform(Z)
        for r in range(rounds):
            P = self.hidden_probabilities(V)
            H = (rng.random(P.shape) < P).astype(np.float64) if sample else P
            V = self.visible_from_hidden(
                H, sample=sample and r < rounds - 1, rng=rng)
        return self.scaler_.inverse(V)

    def transform(self, Z: np.ndarray) -> np.ndarray:
        return self.reconstruct(Z)


def train_rbm(Z: np.ndarray, cfg: RbmTrainConfig) -> GaussianBernoulliRBM:
    """Fit an RBM with the given configuration (functional entry point)."""
    rbm = GaussianBernoulliRBM(hidden_units=cfg.hidden_units, epochs=cfg.epochs,
                               batch_size=cfg.batch_size, cd_steps=cfg.cd_steps,
                               lr=cfg.lr, seed=cfg.seed)
    return rbm.fit(Z)


def save_rbm(rbm: GaussianBernoulliRBM, path: str | Path) -> None:
    rbm._check_initialized()
    write_container(path, RBM_MAGIC, {
        "W": rbm.W_, "b_v": rbm.b_v_, "b_h": rbm.b_h_, "sigma": rbm.sigma_,
        "scaler_mean": rbm.scaler_.mean, "scaler_std": rbm.scaler_.std,
        "cfg_hidden_units": np.int64(rbm.hidden_units),
        "cfg_epochs": np.int64(rbm.epochs),
        "cfg_batch_size": np.int64(rbm.batch_size),
        "cfg_cd_steps": np.int64(rbm.cd_steps),
        "cfg_lr": np.float64(rbm.lr),
        "cfg_seed": np.int64(rbm.seed),
        "cfg_gibbs_rounds": np.int64(rbm.gibbs_rounds),
    })


def load_rbm(path: str | Path) -> GaussianBernoulliRBM:
    d = read_container(path, RBM_MAGIC)
    rbm = GaussianBernoulliRBM(
        hidden_units=int(d["cfg_hidden_units"]), epochs=int(d["cfg_epochs"]),
        batch_size=int(d["cfg_batch_size"]), cd_steps=int(d["cfg_cd_steps"]),
        lr=float(d["cfg_lr"]), seed=int(d["cfg_seed"]),
        gibbs_rounds=int(d["cfg_gibbs_rounds"]))
    rbm.W_, rbm.b_v_, rbm.b_h_ = d["W"], d["b_v"], d["b_h"]
    rbm.sigma_ = d["sigma"]
    rbm.scaler_ = Scaler(d["scaler_mean"], d["scaler_std"])
    return rbm
