"""Synthetic noise operators applied to the evaluation splits.

Four operators cover the feature/adjacency x corrupt/blank combinations:
additive uniform noise on feature entries, zeroed feature entries, rewired
out-edges of selected nodes, and deleted edges. All operators are pure
(inputs never mutated), hit exactly floor(percent/100 * total) targets
chosen uniformly without replacement, and are deterministic per seed. The
training split is never touched: target rows and edges always come from the
validation and test splits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .graph import Graph
from .validation import as_node_ids, check_percent

KINDS = ("Xc", "Xz", "Ac", "Az")
POOLS = ("train-only", "train+val", "any")


@dataclass(frozen=True)
class NoiseSpec:
    """One distortion instruction, serializable into run manifests."""

    kind: str
    percent: int
    pool: str = "any"
    target_split: str = "test"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.pool not in POOLS:
            raise ArgumentError(f"pool must be one of {POOLS}, got {self.pool!r}")
        if self.target_split not in ("val", "test"):
            raise ArgumentError(f"target_split must be 'val' or 'test'")
        check_percent(self.percent)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "percent": self.percent, "pool": self.pool,
                "target_split": self.target_split, "seed": self.seed}


def _flat_choice(rng: np.random.Generator, total: int, count: int) -> np.ndarray:
    return rng.choice(total, size=count, replace=False) if count else np.empty(0, np.int64)


def corrupt_features(X: np.ndarray, target_rows, percent: int, seed) -> np.ndarray:
    """Add U[0,1) to exactly floor(percent/100 * target entries) entries."""
    percent = check_percent(percent)
    X = np.asarray(X, dtype=np.float64)
    rows = as_node_ids(target_rows, X.shape[0], "target_rows")
    out = X.copy()
    total = rows.size * X.shape[1]
    count = (percent * total) // 100
    if count:
        rng = np.random.default_rng(seed)
        flat = _flat_choice(rng, total, count)
        r, c = rows[flat // X.shape[1]], flat % X.shape[1]
        out[r, c] += rng.random(count)
    return out


def blank_features(X: np.ndarray, target_rows, percent: int, seed) -> np.ndarray:
    """Zero exactly floor(percent/100 * target entries) entries."""
    percent = check_percent(percent)
    X = np.asarray(X, dtype=np.float64)
    rows = as_node_ids(target_rows, X.shape[0], "target_rows")
    out = X.copy()
    total = rows.size * X.shape[1]
    count = (percent * total) // 100
    if count:
        rng = np.random.default_rng(seed)
        flat = _flat_choice(rng, total, count)
        out[rows[flat // X.shape[1]], flat % X.shape[1]] = 0.0
    return out


def corrupt_adjacency(graph: Graph, target_nodes, percent: int, pool,
                      seed) -> Graph:
    """Rewire every out-edge of floor(percent/100 * targets) selected nodes.

    Each rewired edge keeps its source; the endpoint becomes a uniform draw
    from the pool (redrawn while it lands on the source itself, when the
    pool offers an alternative). Edge count is conserved and unselected
    nodes keep their rows bit-identical.
    """
    percent = check_percent(percent)
    targets = as_node_ids(target_nodes, graph.num_nodes, "target_nodes")
    pool = as_node_ids(pool, graph.num_nodes, "pool")
    if pool.size == 0:
        raise ArgumentError("pool must be non-empty")
    count = (percent * targets.size) // 100
    if count == 0:
        return graph
    rng = np.random.default_rng(seed)
    chosen = targets[_flat_choice(rng, targets.size, count)]
    src, dst = graph.edge_array()
    new_dst = dst.copy()
    for node in np.sort(chosen):
        lo, hi = graph.csr_offsets[node], graph.csr_offsets[node + 1]
        draws = pool[rng.integers(pool.size, size=hi - lo)]
        while pool.size > 1:
            selfish = draws == node
            if not selfish.any():
                break
            draws[selfish] = pool[rng.integers(pool.size, size=int(selfish.sum()))]
        new_dst[lo:hi] = draws
    return graph.with_edges(src, new_dst)


def blank_adjacency(graph: Graph, target_edges, percent: int, seed) -> Graph:
    """Delete exactly floor(percent/100 * |target edges|) edges and repack.

    target_edges indexes into the graph's CSR edge array; the node set is
    unchanged, so deletion can isolate nodes.
    """
    percent = check_percent(percent)
    target_edges = np.unique(np.asarray(target_edges, dtype=np.int64))
    if target_edges.size and (target_edges[0] < 0
                              or target_edges[-1] >= graph.num_edges):
        raise ArgumentError("target_edges outside the edge array")
    count = (percent * target_edges.size) // 100
    if count == 0:
        return graph
    rng = np.random.default_rng(seed)
    drop = target_edges[_flat_choice(rng, target_edges.size, count)]
    keep = np.ones(graph.num_edges, dtype=bool)
    keep[drop] = False
    src, dst = graph.edge_array()
    return graph.with_edges(src[keep], dst[keep])


def edges_from_nodes(graph: Graph, nodes) -> np.ndarray:
    """Indices of all edges whose source lies in the given node set."""
    nodes = as_node_ids(nodes, graph.num_nodes, "nodes")
    spans = [np.arange(graph.csr_offsets[n], graph.csr_offsets[n + 1])
             for n in nodes]
    return (np.concatenate(spans).astype(np.int64)
            if spans else np.empty(0, np.int64))


def resolve_pool(graph: Graph, policy: str) -> np.ndarray:
    """Node set a rewired edge may point into, per the configured policy."""
    s = graph.split
    if policy == "train-only":
        return s.train
    if policy == "train+val":
        return np.union1d(s.train, s.val)
    if policy == "any":
        return np.union1d(np.union1d(s.train, s.val), s.test)
    raise ArgumentError(f"unknown pool policy {policy!r}")


@dataclass(frozen=True)
class NoisePlan:
    """Feature and adjacency distortion levels for one evaluation graph.

    Both evaluation splits are distorted (the train split never is). For
    rewiring, each split draws endpoints from its own pool so that
    time-split datasets can restrict validation rewiring to the train set
    and test rewiring to train+val.
    """

    x_kind: str = "Xz"            # "Xc" | "Xz"
    a_kind: str = "Ac"            # "Ac" | "Az"
    n_x: int = 0
    n_a: int = 0
    val_pool: str = "any"
    test_pool: str = "any"
    seed: int = 0

    def apply(self, graph: Graph) -> Graph:
        eval_nodes = np.union1d(graph.split.val, graph.split.test)
        noisy = graph
        if self.n_a > 0 and eval_nodes.size:
            if self.a_kind == "Ac":
                noisy = corrupt_adjacency(noisy, graph.split.val, self.n_a,
                                          resolve_pool(graph, self.val_pool),
                                          seed=(self.seed, 202, self.n_a, 0))
                noisy = corrupt_adjacency(noisy, graph.split.test, self.n_a,
                                          resolve_pool(graph, self.test_pool),
                                          seed=(self.seed, 202, self.n_a, 1))
            elif self.a_kind == "Az":
                noisy = blank_adjacency(noisy, edges_from_nodes(noisy, eval_nodes),
                                        self.n_a, seed=(self.seed, 202, self.n_a))
            else:
                raise ArgumentError(f"unknown adjacency noise {self.a_kind!r}")
        if self.n_x > 0 and eval_nodes.size:
            op = {"Xc": corrupt_features, "Xz": blank_features}.get(self.x_kind)
            if op is None:
                raise ArgumentError(f"unknown feature noise {self.x_kind!r}")
            noisy = noisy.with_features(
                op(noisy.features, eval_nodes, self.n_x,
                   seed=(self.seed, 101, self.n_x)))
        return noisy
