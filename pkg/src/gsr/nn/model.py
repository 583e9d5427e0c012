"""Model containers for the 3-layer classifier networks and their checkpoints."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ArgumentError, ParseError
from ..serialize import read_container, write_container

MODEL_MAGIC = b"GSRM"

ARCHS = ("mlp", "n2v", "gcn", "sage")


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5

    @classmethod
    def initial(cls, width: int) -> "BatchNormState":
        return cls(gamma=np.ones(width), beta=np.zeros(width),
                   running_mean=np.zeros(width), running_var=np.ones(width))

    def copy(self) -> "BatchNormState":
        return BatchNormState(self.gamma.copy(), self.beta.copy(),
                              self.running_mean.copy(), self.running_var.copy(),
                              self.momentum, self.epsilon)


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    dropout_p: float = 0.5
    hidden_dim: int = 64
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ArgumentError("learning_rate must be >= 0")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ArgumentError("dropout_p must lie in [0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ArgumentError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class DnnModel:
    """Three weight layers with two batch-norm blocks between them.

    For the neighbor-aggregating architecture with a skip connection, each
    weight matrix vertically stacks the self block on top of the neighbor
    block, so W has 2 * fan_in rows.
    """

    arch: str
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    bn1: BatchNormState
    bn2: BatchNormState
    dropout_p: float
    hidden_dim: int
    input_dim: int
    num_classes: int
    train_config: TrainConfig | None = None
    embeddings: np.ndarray | None = None

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ArgumentError(f"unknown architecture {self.arch!r}")
        stack = 2 if self.arch == "sage" else 1
        want = [(stack * self.input_dim, self.hidden_dim),
                (stack * self.hidden_dim, self.hidden_dim),
                (stack * self.hidden_dim, self.num_classes)]
        got = [self.W1.shape, self.W2.shape, self.W3.shape]
        if got != [tuple(w) for w in want]:
            raise ArgumentError(f"weight shape chain {got} != expected {want}")

    def parameters(self) -> dict[str, np.ndarray]:
        """Trainable parameters, keyed by name (batch-norm stats are buffers)."""
        return {
            "W1": self.W1, "b1": self.b1,
            "gamma1": self.bn1.gamma, "beta1": self.bn1.beta,
            "W2": self.W2, "b2": self.b2,
            "gamma2": self.bn2.gamma, "beta2": self.bn2.beta,
            "W3": self.W3, "b3": self.b3,
        }

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        self.W1, self.b1 = params["W1"], params["b1"]
        self.W2, self.b2 = params["W2"], params["b2"]
        self.W3, self.b3 = params["W3"], params["b3"]
        self.bn1.gamma, self.bn1.beta = params["gamma1"], params["beta1"]
        self.bn2.gamma, self.bn2.beta = params["gamma2"], params["beta2"]

    def sage_blocks(self, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        half = W.shape[0] // 2
        return W[:half], W[half:]

    def tap_width(self, tap: int) -> int:
        """Column count of each captured representation."""
        return {0: self.input_dim, 1: self.hidden_dim,
                2: self.hidden_dim, 3: self.num_classes}[tap]

    def copy(self) -> "DnnModel":
        return DnnModel(self.arch, self.W1.copy(), self.b1.copy(),
                        self.W2.copy(), self.b2.copy(), self.W3.copy(),
                        self.b3.copy(), self.bn1.copy(), self.bn2.copy(),
                        self.dropout_p, self.hidden_dim, self.input_dim,
                        self.num_classes, self.train_config,
                        None if self.embeddings is None else self.embeddings.copy())


def he_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(arch: str, input_dim: int, hidden_dim: int, num_classes: int,
               dropout_p: float, seed: int,
               embeddings: np.ndarray | None = None) -> DnnModel:
    rng = np.random.default_rng(seed)
    stack = 2 if arch == "sage" else 1
    dims = [(stack * input_dim, hidden_dim),
            (stack * hidden_dim, hidden_dim),
            (stack * hidden_dim, num_classes)]
    Ws = [he_uniform(rng, fi, fo) for fi, fo in dims]
    bs = [np.zeros(fo) for _, fo in dims]
    return DnnModel(arch, Ws[0], bs[0], Ws[1], bs[1], Ws[2], bs[2],
                    BatchNormState.initial(hidden_dim),
                    BatchNormState.initial(hidden_dim),
                    dropout_p, hidden_dim, input_dim, num_classes,
                    embeddings=embeddings)


def save_model(model: DnnModel, path: str | Path) -> None:
    cfg = model.train_config or TrainConfig()
    entries = {
        "arch": model.arch,
        "dims": np.array([model.input_dim, model.hidden_dim, model.num_classes],
                         dtype=np.int64),
        "dropout_p": np.float64(model.dropout_p),
        "W1": model.W1, "b1": model.b1,
        "W2": model.W2, "b2": model.b2,
        "W3": model.W3, "b3": model.b3,
        "bn1_gamma": model.bn1.gamma, "bn1_beta": model.bn1.beta,
        "bn1_mean": model.bn1.running_mean, "bn1_var": model.bn1.running_var,
        "bn2_gamma": model.bn2.gamma, "bn2_beta": model.bn2.beta,
        "bn2_mean": model.bn2.running_mean, "bn2_var": model.bn2.running_var,
        "bn_momentum": np.float64(model.bn1.momentum),
        "bn_epsilon": np.float64(model.bn1.epsilon),
        "cfg_epochs": np.int64(cfg.epochs),
        "cfg_learning_rate": np.float64(cfg.learning_rate),
        "cfg_dropout_p": np.float64(cfg.dropout_p),
        "cfg_hidden_dim": np.int64(cfg.hidden_dim),
        "cfg_seed": np.int64(cfg.seed),
        "cfg_optimizer": cfg.optimizer,
    }
    if model.embeddings is not None:
        entries["embeddings"] = model.embeddings
    write_container(path, MODEL_MAGIC, entries)


def load_model(path: str | Path) -> DnnModel:
    d = read_container(path, MODEL_MAGIC)
    try:
        input_dim, hidden_dim, num_classes = (int(v) for v in d["dims"])
        momentum, epsilon = float(d["bn_momentum"]), float(d["bn_epsilon"])
        bn1 = BatchNormState(d["bn1_gamma"], d["bn1_beta"], d["bn1_mean"],
                             d["bn1_var"], momentum, epsilon)
        bn2 = BatchNormState(d["bn2_gamma"], d["bn2_beta"], d["bn2_mean"],
                             d["bn2_var"], momentum, epsilon)
        cfg = TrainConfig(epochs=int(d["cfg_epochs"]),
                          learning_rate=float(d["cfg_learning_rate"]),
                          dropout_p=float(d["cfg_dropout_p"]),
                          hidden_dim=int(d["cfg_hidden_dim"]),
                          seed=int(d["cfg_seed"]),
                          optimizer=d["cfg_optimizer"])
        return DnnModel(d["arch"], d["W1"], d["b1"], d["W2"], d["b2"],
                        d["W3"], d["b3"], bn1, bn2, float(d["dropout_p"]),
                        hidden_dim, input_dim, num_classes, cfg,
                        d.get("embeddings"))
    except KeyError as exc:
        raise ParseError(f"{path}: model checkpoint missing entry {exc}") from exc
