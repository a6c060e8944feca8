"""Frozen embedding vectors in four namespaces, with a bit-exact binary format.

The store is the only bridge between offline vector extraction and the
training/scoring engine.  Vectors live on disk (and in memory) as 32-bit
floats; ``get`` widens to the engine's 64-bit working precision.

Binary layout (all little-endian):

    magic "MLEX" | version u32 | dimension u32 |
    4 namespace blocks in order TYPE, SYNSET, TOKEN, SENT, each:
        entry count u64, then per entry:
        key length u32 | UTF-8 key bytes | dimension * f32
"""

from __future__ import annotations

import struct
from urllib.parse import quote, unquote

import numpy as np

from .corpora import Token
from .errors import DimensionMismatchError, FormatError, MissingKeyError

__all__ = [
    "EmbeddingStore",
    "NAMESPACES",
    "open_store",
    "write_store",
    "token_key",
    "sent_key",
]

MAGIC = b"MLEX"
FORMAT_VERSION = 1
NAMESPACES = ("TYPE", "SYNSET", "TOKEN", "SENT")


class EmbeddingStore:
    """In-memory map of namespace -> key -> float32 vector, all of one length."""

    def __init__(self, dimension: int):
        if dimension <= 0:
            raise DimensionMismatchError(f"dimension must be positive, got {dimension}")
        self.dimension = int(dimension)
        self._spaces: dict[str, dict[str, np.ndarray]] = {ns: {} for ns in NAMESPACES}

    def _space(self, namespace: str) -> dict[str, np.ndarray]:
        if namespace not in self._spaces:
            raise MissingKeyError(namespace, "<namespace>")
        return self._spaces[namespace]

    def put(self, namespace: str, key: str, vector) -> None:
        vector = np.asarray(vector, dtype=np.float32)
        if vector.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"vector for {namespace}:{key} has shape {vector.shape},"
                f" expected ({self.dimension},)"
            )
        self._space(namespace)[key] = vector

    def get(self, namespace: str, key: str) -> np.ndarray:
        """The stored vector widened to float64."""
        space = self._space(namespace)
        if key not in space:
            raise MissingKeyError(namespace, key)
        return space[key].astype(np.float64)

    def has(self, namespace: str, key: str) -> bool:
        return key in self._space(namespace)

    def keys(self, namespace: str):
        return self._space(namespace).keys()

    def raw(self, namespace: str, key: str) -> np.ndarray:
        """The float32 vector as stored (bitwise round-trip checks)."""
        space = self._space(namespace)
        if key not in space:
            raise MissingKeyError(namespace, key)
        return space[key]

    def matrix(self, namespace: str, keys) -> np.ndarray:
        """Stack vectors for ``keys`` into a (len(keys), dimension) f64 matrix."""
        space = self._space(namespace)
        rows = np.empty((len(keys), self.dimension), dtype=np.float64)
        for i, key in enumerate(keys):
            if key not in space:
                raise MissingKeyError(namespace, key)
            rows[i] = space[key]
        return rows

    def __eq__(self, other):
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if self.dimension != other.dimension:
            return False
        for ns in NAMESPACES:
            a, b = self._spaces[ns], other._spaces[ns]
            if a.keys() != b.keys():
                return False
            for key in a:
                if a[key].tobytes() != b[key].tobytes():
                    return False
        return True


def write_store(store: EmbeddingStore, path) -> None:
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<II", FORMAT_VERSION, store.dimension))
        for ns in NAMESPACES:
            space = store._spaces[ns]
            handle.write(struct.pack("<Q", len(space)))
            for key in space:
                key_bytes = key.encode("utf-8")
                handle.write(struct.pack("<I", len(key_bytes)))
                handle.write(key_bytes)
                handle.write(space[key].astype("<f4").tobytes())


def open_store(path) -> EmbeddingStore:
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    offset = 4
    try:
        version, dimension = struct.unpack_from("<II", data, offset)
        offset += 8
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported format version {version}")
        store = EmbeddingStore(dimension)
        vec_bytes = 4 * dimension
        for ns in NAMESPACES:
            (count,) = struct.unpack_from("<Q", data, offset)
            offset += 8
            space = store._spaces[ns]
            for _ in range(count):
                (key_len,) = struct.unpack_from("<I", data, offset)
                offset += 4
                key = data[offset : offset + key_len].decode("utf-8")
                offset += key_len
                vector = np.frombuffer(data, dtype="<f4", count=dimension, offset=offset)
                offset += vec_bytes
                space[key] = vector.copy()
    except struct.error as exc:
        raise FormatError(f"{path}: truncated store file") from exc
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return store


def _escape(part: str) -> str:
    # Injective join: percent-escape the separator (and the escape char).
    return quote(part, safe="")


def unescape_key_part(part: str) -> str:
    return unquote(part)


def token_key(token: Token) -> str:
    """Address of a token's contextual vector: corpus:doc:sent:index."""
    return ":".join(
        (_escape(token.corpus_id), _escape(token.doc_id), _escape(token.sent_id), str(token.index))
    )


def sent_key(token: Token) -> str:
    """Address of a token's sentence vector: corpus:doc:sent."""
    return ":".join((_escape(token.corpus_id), _escape(token.doc_id), _escape(token.sent_id)))
