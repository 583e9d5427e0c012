"""Graph data model, dataset loaders, synthetic generation, and adjacency normalization.

Graphs are stored in CSR form (offsets + targets) with a dense per-node
feature matrix, integer labels, and disjoint train/val/test masks. All
arrays are frozen after construction so graphs can be shared freely across
parallel evaluation workers.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, IntegrityError, ParseError
from .serialize import read_container, write_container
from .validation import as_node_ids

GRAPH_MAGIC = b"GSR1"


@dataclass(frozen=True)
class SplitMasks:
    """Disjoint node-id sets for training, validation, and testing."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, num_nodes: int) -> None:
        parts = {"train": self.train, "val": self.val, "test": self.test}
        seen = np.concatenate(list(parts.values())) if num_nodes else np.empty(0)
        for name, ids in parts.items():
            if ids.size and (ids.min() < 0 or ids.max() >= num_nodes):
                raise IntegrityError(f"split {name} has ids outside [0, {num_nodes})")
        if seen.size != np.unique(seen).size:
            raise IntegrityError("split masks overlap")


@dataclass(frozen=True)
class Graph:
    """CSR-stored directed edge structure plus node features, labels, and splits."""

    num_nodes: int
    csr_offsets: np.ndarray
    csr_targets: np.ndarray
    directed: bool
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: SplitMasks

    def __post_init__(self):
        for arr in (self.csr_offsets, self.csr_targets, self.features,
                    self.labels, self.split.train, self.split.val, self.split.test):
            arr.setflags(write=False)
        self.validate()

    def validate(self) -> None:
        n = self.num_nodes
        off, tgt = self.csr_offsets, self.csr_targets
        if off.shape != (n + 1,) or off[0] != 0 or off[-1] != tgt.size:
            raise IntegrityError("csr_offsets must run from 0 to the edge count")
        if np.any(np.diff(off) < 0):
            raise IntegrityError("csr_offsets must be non-decreasing")
        if tgt.size and (tgt.min() < 0 or tgt.max() >= n):
            raise IntegrityError(f"csr_targets contain ids outside [0, {n})")
        if self.features.shape[0] != n:
            raise IntegrityError("features must have one row per node")
        if not np.all(np.isfinite(self.features)):
            raise IntegrityError("features contain non-finite values")
        if self.labels.shape != (n,):
            raise IntegrityError("labels must have one entry per node")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise IntegrityError(f"labels outside [0, {self.num_classes})")
        self.split.validate(n)

    @property
    def num_edges(self) -> int:
        return int(self.csr_targets.size)

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def out_neighbors(self, node: int) -> np.ndarray:
        return self.csr_targets[self.csr_offsets[node]:self.csr_offsets[node + 1]]

    def edge_array(self) -> tuple[np.ndarray, np.ndarray]:
        """Parallel (sources, targets) arrays for all stored edges."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64),
                        np.diff(self.csr_offsets))
        return src, self.csr_targets.copy()

    def with_features(self, features: np.ndarray) -> "Graph":
        return Graph(self.num_nodes, self.csr_offsets, self.csr_targets,
                     self.directed, np.ascontiguousarray(features, dtype=np.float64),
                     self.labels, self.num_classes, self.split)

    def with_edges(self, sources: np.ndarray, targets: np.ndarray) -> "Graph":
        off, tgt = build_csr(self.num_nodes, sources, targets)
        return Graph(self.num_nodes, off, tgt, self.directed, self.features,
                     self.labels, self.num_classes, self.split)


def build_csr(num_nodes: int, sources: np.ndarray,
              targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pack (src, dst) edge arrays into CSR, keeping a stable per-source order."""
    sources = np.asarray(sources, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if sources.shape != targets.shape:
        raise ArgumentError("edge sources and targets must have equal length")
    order = np.argsort(sources, kind="stable")
    counts = np.bincount(sources, minlength=num_nodes)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, targets[order].copy()


def make_split(num_nodes: int, train, val, test) -> SplitMasks:
    return SplitMasks(as_node_ids(train, num_nodes, "train"),
                      as_node_ids(val, num_nodes, "val"),
                      as_node_ids(test, num_nodes, "test"))


# ---------------------------------------------------------------------------
# Loading

def load_graph(path: str | Path, format: str) -> Graph:
    """Load a graph from one of the supported on-disk formats."""
    path = Path(path)
    if not path.exists():
        raise ArgumentError(f"{path} does not exist")
    if format == "wikics-json":
        return _load_wikics_json(path)
    if format == "ogb-dir":
        return _load_ogb_dir(path)
    if format == "native-binary":
        return load_native(path)
    raise ArgumentError(f"unknown graph format {format!r}")


def _load_wikics_json(path: Path) -> Graph:
    """Hyperlink citation JSON: features, labels, links, and 20 mask columns.

    Only the first split is used; every node assigned to none of train, val,
    or test in that split is merged into the training set.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("features", "labels", "links", "train_masks", "val_masks", "test_mask"):
        if key not in raw:
            raise ParseError(f"{path}: missing field {key!r}")
    features = np.asarray(raw["features"], dtype=np.float64)
    labels = np.asarray(raw["labels"], dtype=np.int64)
    n = features.shape[0]
    if labels.size != n:
        raise ParseError(f"{path}: field 'labels' length {labels.size} != {n} nodes")
    links = raw["links"]
    if len(links) != n:
        raise ParseError(f"{path}: field 'links' length {len(links)} != {n} nodes")
    src = np.concatenate([np.full(len(nbrs), i, dtype=np.int64)
                          for i, nbrs in enumerate(links)]) if n else np.empty(0, np.int64)
    dst = np.concatenate([np.asarray(nbrs, dtype=np.int64)
                          for nbrs in links]) if n else np.empty(0, np.int64)
    off, tgt = build_csr(n, src, dst)

    train = np.asarray(raw["train_masks"][0], dtype=bool)
    val = np.asarray(raw["val_masks"][0], dtype=bool)
    test = np.asarray(raw["test_mask"], dtype=bool)
    if train.size != n or val.size != n or test.size != n:
        raise ParseError(f"{path}: split masks do not cover all {n} nodes")
    unassigned = ~(train | val | test)
    train = train | unassigned
    split = make_split(n, np.flatnonzero(train), np.flatnonzero(val),
                       np.flatnonzero(test))
    return Graph(n, off, tgt, True, features, labels,
                 int(labels.max()) + 1 if n else 0, split)


def _read_csv_ints(path: Path) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt") as fh:
        return np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)


def _read_csv_floats(path: Path) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt") as fh:
        return np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)


def _find(dirpath: Path, stem: str) -> Path:
    for cand in (dirpath / f"{stem}.csv", dirpath / f"{stem}.csv.gz"):
        if cand.exists():
            return cand
    raise ParseError(f"{dirpath}: missing file {stem}.csv[.gz]")


def _load_ogb_dir(path: Path) -> Graph:
    """Node-prediction directory layout: raw/ CSV arrays plus split/time/ indices."""
    raw = path / "raw"
    if not raw.is_dir():
        raise ParseError(f"{path}: missing raw/ directory")
    edges = _read_csv_ints(_find(raw, "edge"))
    if edges.shape[1] != 2:
        raise ParseError(f"{path}: field 'edge' must have two columns")
    features = _read_csv_floats(_find(raw, "node-feat"))
    labels = _read_csv_ints(_find(raw, "node-label")).ravel()
    n = features.shape[0]
    if labels.size != n:
        raise ParseError(f"{path}: field 'node-label' length {labels.size} != {n}")
    split_dir = path / "split" / "time"
    if not split_dir.is_dir():
        raise ParseError(f"{path}: missing split/time/ directory")
    split = make_split(
        n,
        _read_csv_ints(_find(split_dir, "train")).ravel(),
        _read_csv_ints(_find(split_dir, "valid")).ravel(),
        _read_csv_ints(_find(split_dir, "test")).ravel(),
    )
    off, tgt = build_csr(n, edges[:, 0], edges[:, 1])
    return Graph(n, off, tgt, True, features, labels, int(labels.max()) + 1, split)


def save_native(graph: Graph, path: str | Path) -> None:
    write_container(path, GRAPH_MAGIC, {
        "num_nodes": np.int64(graph.num_nodes),
        "directed": np.int64(graph.directed),
        "num_classes": np.int64(graph.num_classes),
        "csr_offsets": graph.csr_offsets,
        "csr_targets": graph.csr_targets,
        "features": graph.features,
        "labels": graph.labels,
        "split_train": graph.split.train,
        "split_val": graph.split.val,
        "split_test": graph.split.test,
    })


def load_native(path: str | Path) -> Graph:
    d = read_container(path, GRAPH_MAGIC)
    n = int(d["num_nodes"])
    split = SplitMasks(d["split_train"], d["split_val"], d["split_test"])
    return Graph(n, d["csr_offsets"], d["csr_targets"], bool(int(d["directed"])),
                 d["features"], d["labels"], int(d["num_classes"]), split)


# ---------------------------------------------------------------------------
# Synthetic graphs

def generate_sbm_graph(num_nodes: int, num_classes: int, p_in: float, p_out: float,
                       feature_dim: int, feature_shift: float, seed: int) -> Graph:
    """Stochastic-block-model graph with class-conditional Gaussian features.

    Nodes are assigned to classes in contiguous blocks (remainder to the last
    class). Every ordered pair (u, v), u != v, receives an edge with
    probability p_in when u and v share a class and p_out otherwise.

    Each class owns a dense orthonormal direction scaled by feature_shift;
    features are Gaussian around that class pattern with a within-class
    standard deviation of 0.25, so a unit shift yields clearly separable
    classes (the stand-in for informative real-world node features). All
    features share a constant baseline of three shifts: real embedding
    matrices are not zero-centered, and the offset keeps the zero vector off
    the data manifold so that blanked entries read as corruption rather
    than merely small values. The split is a seeded 60/20/20 shuffle.
    """
    if num_classes > num_nodes:
        raise ArgumentError("num_classes cannot exceed num_nodes")
    if num_classes > feature_dim:
        raise ArgumentError("feature_dim must be >= num_classes")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ArgumentError("require 0 <= p_out <= p_in <= 1")
    rng = np.random.default_rng(seed)

    block = num_nodes // num_classes
    labels = np.minimum(np.arange(num_nodes, dtype=np.int64) // block,
                        num_classes - 1)

    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    np.fill_diagonal(prob, 0.0)
    mask = rng.random((num_nodes, num_nodes)) < prob
    src, dst = np.nonzero(mask)
    off, tgt = build_csr(num_nodes, src.astype(np.int64), dst.astype(np.int64))

    basis, _ = np.linalg.qr(rng.standard_normal((feature_dim, num_classes)))
    means = 3.0 * feature_shift + feature_shift * basis.T
    features = 0.25 * rng.standard_normal((num_nodes, feature_dim)) + means[labels]

    perm = rng.permutation(num_nodes)
    n_train = int(round(num_nodes * 0.6))
    n_val = int(round(num_nodes * 0.2))
    split = make_split(num_nodes, perm[:n_train], perm[n_train:n_train + n_val],
                       perm[n_train + n_val:])
    return Graph(num_nodes, off, tgt, True, features, labels, num_classes, split)


# ---------------------------------------------------------------------------
# Normalization and aggregation operators

def symmetrized_adjacency(graph: Graph) -> sp.csr_matrix:
    """Binary undirected adjacency: an edge in either direction connects both ways."""
    n = graph.num_nodes
    src, dst = graph.edge_array()
    A = sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(n, n))
    A = A.maximum(A.T)
    A.data[:] = 1.0
    return A


def normalize_adjacency(graph: Graph, add_self_loops: bool = True) -> sp.csr_matrix:
    """Symmetric degree normalization of the symmetrized adjacency.

    Returns D^{-1/2} (A_sym [+ I]) D^{-1/2}. Zero-degree rows stay all-zero
    instead of dividing by zero, so isolated nodes simply receive no message.
    """
    n = graph.num_nodes
    A = symmetrized_adjacency(graph)
    if add_self_loops:
        A = A.maximum(sp.identity(n, format="csr"))
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv_sqrt = np.zeros(n)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    D = sp.diags(inv_sqrt)
    return (D @ A @ D).tocsr()


def mean_aggregator(graph: Graph) -> sp.csr_matrix:
    """Row-stochastic neighbor-mean operator over the symmetrized adjacency.

    Rows of isolated nodes are all-zero, contributing nothing to the
    aggregate (the skip path carries their own features).
    """
    A = symmetrized_adjacency(graph)
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv = np.zeros(graph.num_nodes)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    return (sp.diags(inv) @ A).tocsr()
