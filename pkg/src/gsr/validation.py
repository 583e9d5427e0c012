"""Input validation helpers used at the public API boundaries."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import ArgumentError, DimensionError


def as_matrix(X, name: str = "X", *, cols: int | None = None,
              require_finite: bool = True) -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array, checking shape and finiteness."""
    A = np.ascontiguousarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={A.ndim}")
    if cols is not None and A.shape[1] != cols:
        raise DimensionError(f"{name} must have {cols} columns, got {A.shape[1]}")
    if require_finite and not np.all(np.isfinite(A)):
        raise ArgumentError(f"{name} contains non-finite values")
    return A


def as_vector(x, name: str = "x", *, size: int | None = None,
              require_finite: bool = True) -> np.ndarray:
    A = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if size is not None and A.size != size:
        raise DimensionError(f"{name} must have length {size}, got {A.size}")
    if require_finite and not np.all(np.isfinite(A)):
        raise ArgumentError(f"{name} contains non-finite values")
    return A


def as_node_ids(ids: Iterable[int], num_nodes: int, name: str = "nodes") -> np.ndarray:
    """Sorted, deduplicated int64 node ids, all within [0, num_nodes)."""
    a = np.unique(np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids,
                             dtype=np.int64))
    if a.size and (a[0] < 0 or a[-1] >= num_nodes):
        raise ArgumentError(f"{name} contains ids outside [0, {num_nodes})")
    return a


def check_probability(p: float, name: str = "p", *, allow_one: bool = True) -> float:
    p = float(p)
    hi_ok = p <= 1.0 if allow_one else p < 1.0
    if not (0.0 <= p and hi_ok):
        raise ArgumentError(f"{name}={p} is not a valid probability")
    return p


def check_percent(n: int, name: str = "percent") -> int:
    """Distortion levels are multiples of 10 in [0, 100]."""
    n = int(n)
    if n < 0 or n > 100 or n % 10 != 0:
        raise ArgumentError(f"{name}={n} must be a multiple of 10 in [0, 100]")
    return n


def require(condition: bool, exc_type: type, message: str) -> None:
    if not condition:
        raise exc_type(message)
