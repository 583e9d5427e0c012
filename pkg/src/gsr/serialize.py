"""Versioned little-endian binary containers and atomic file writes.

All toolkit checkpoints share one container layout: a 4-byte magic, a u32
format version, and a sequence of named entries. Each entry is a UTF-8 key,
a dtype code, a shape, and the raw array bytes (little-endian, C order).
Strings are stored as uint8 byte arrays under a reserved dtype code so that
round-trips are exact.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError

_VERSION = 1

_DTYPE_CODES = {
    "<f8": 1,
    "<i8": 2,
    "|u1": 3,
    "str": 4,
}
_CODE_DTYPES = {1: "<f8", 2: "<i8", 3: "|u1"}


def _encode_entry(key: str, value) -> bytes:
    if isinstance(value, str):
        payload = value.encode("utf-8")
        code, shape = _DTYPE_CODES["str"], (len(payload),)
    else:
        arr = np.asarray(value)
        if arr.dtype.kind == "f":
            arr = arr.astype("<f8")
        elif arr.dtype.kind in "iub":
            arr = arr.astype("<i8")
        else:
            raise TypeError(f"unsupported dtype {arr.dtype} for entry {key!r}")
        code = _DTYPE_CODES[arr.dtype.str]
        shape = arr.shape
        payload = np.ascontiguousarray(arr).tobytes()
    kb = key.encode("utf-8")
    head = struct.pack("<HBB", len(kb), code, len(shape))
    dims = struct.pack(f"<{len(shape)}Q", *shape) if shape else b""
    return head + kb + dims + payload


def write_container(path: str | Path, magic: bytes, entries: dict) -> None:
    """Write entries atomically (temp file in the same directory, then rename)."""
    if len(magic) != 4:
        raise ValueError("magic must be exactly 4 bytes")
    blob = bytearray()
    blob += magic
    blob += struct.pack("<II", _VERSION, len(entries))
    for key in entries:
        blob += _encode_entry(key, entries[key])
    atomic_write_bytes(path, bytes(blob))


def read_container(path: str | Path, magic: bytes) -> dict:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != magic:
        raise ParseError(f"{path}: bad magic, expected {magic!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ParseError(f"{path}: unsupported container version {version}")
    out: dict = {}
    off = 12
    for _ in range(count):
        try:
            klen, code, ndim = struct.unpack_from("<HBB", data, off)
            off += 4
            key = data[off:off + klen].decode("utf-8")
            off += klen
            shape = struct.unpack_from(f"<{ndim}Q", data, off) if ndim else ()
            off += 8 * ndim
        except (struct.error, UnicodeDecodeError) as exc:
            raise ParseError(f"{path}: truncated entry header") from exc
        if code == _DTYPE_CODES["str"]:
            (n,) = shape
            out[key] = data[off:off + n].decode("utf-8")
            off += n
        else:
            dtype = np.dtype(_CODE_DTYPES.get(code))
            if code not in _CODE_DTYPES:
                raise ParseError(f"{path}: unknown dtype code {code} for {key!r}")
            n = int(np.prod(shape)) if shape else 1
            nbytes = n * dtype.itemsize
            arr = np.frombuffer(data[off:off + nbytes], dtype=dtype)
            if arr.size != n:
                raise ParseError(f"{path}: truncated payload for {key!r}")
            out[key] = arr.reshape(shape).copy()
            off += nbytes
    return out


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
