"""The interchange formats this tool reads and writes.

The MLEX store layout is reproduced here byte for byte so the consumer
package never has to be imported; the two implementations meet only at
the file. Layout (little-endian):

    magic "MLEX" | version u32 | dimension u32 |
    4 namespace blocks in order TYPE, SYNSET, TOKEN, SENT, each:
        entry count u64, then per entry:
        key length u32 | UTF-8 key bytes | dimension * f32

Corpus and lexicon inputs are JSONL; only the fields needed for
extraction are validated here, extra fields pass through untouched.
"""

from __future__ import annotations

import json
import struct
from urllib.parse import quote

import numpy as np

from .errors import DataError

MAGIC = b"MLEX"
FORMAT_VERSION = 1
NAMESPACES = ("TYPE", "SYNSET", "TOKEN", "SENT")


def escape_key_part(part: str) -> str:
    # keys join parts with ":", so the separator must never survive inside one
    return quote(part, safe="")


def token_key(corpus_id: str, doc_id: str, sent_id: str, index: int) -> str:
    return ":".join((escape_key_part(corpus_id), escape_key_part(doc_id),
                     escape_key_part(sent_id), str(index)))


def sent_key(corpus_id: str, doc_id: str, sent_id: str) -> str:
    return ":".join((escape_key_part(corpus_id), escape_key_part(doc_id),
                     escape_key_part(sent_id)))


def write_mlex(path, dimension: int, spaces: dict[str, dict[str, np.ndarray]]) -> None:
    """Write namespace -> key -> vector maps as one store file.

    Keys are written sorted so the output is byte-identical however the
    maps were assembled.
    """
    for ns in spaces:
        if ns not in NAMESPACES:
            raise DataError(f"unknown namespace {ns!r}")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<II", FORMAT_VERSION, dimension))
        for ns in NAMESPACES:
            space = spaces.get(ns, {})
            handle.write(struct.pack("<Q", len(space)))
            for key in sorted(space):
                vector = np.asarray(space[key], dtype="<f4")
                if vector.shape != (dimension,):
                    raise DataError(
                        f"vector for {ns}:{key} has shape {vector.shape},"
                        f" expected ({dimension},)")
                key_bytes = key.encode("utf-8")
                handle.write(struct.pack("<I", len(key_bytes)))
                handle.write(key_bytes)
                handle.write(vector.tobytes())


def read_mlex(path):
    """Parse a store file back into (dimension, spaces); used to verify
    round trips without involving the consumer."""
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {data[:4]!r}")
    offset = 4
    version, dimension = struct.unpack_from("<II", data, offset)
    offset += 8
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    spaces: dict[str, dict[str, np.ndarray]] = {}
    for ns in NAMESPACES:
        (count,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        space: dict[str, np.ndarray] = {}
        for _ in range(count):
            (key_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            key = data[offset:offset + key_len].decode("utf-8")
            offset += key_len
            space[key] = np.frombuffer(data, dtype="<f4", count=dimension,
                                       offset=offset).copy()
            offset += 4 * dimension
        spaces[ns] = space
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes")
    return dimension, spaces


def _read_jsonl(path):
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc.msg}")


def read_corpus_tokens(path) -> list[dict]:
    """Token records from a corpus file: corpus/doc/sent/tokens/index.

    Works for both sense-tagged and metaphor-tagged files; their label
    fields are irrelevant to extraction.
    """
    records = []
    for line_no, raw in _read_jsonl(path):
        for field in ("corpus", "doc", "sent", "tokens", "index"):
            if field not in raw:
                raise DataError(f"{path}:{line_no}: missing field {field!r}")
        tokens = [str(t) for t in raw["tokens"]]
        index = raw["index"]
        if not isinstance(index, int) or not 0 <= index < len(tokens):
            raise DataError(f"{path}:{line_no}: index {index!r} out of range")
        records.append({
            "corpus": str(raw["corpus"]),
            "doc": str(raw["doc"]),
            "sent": str(raw["sent"]),
            "tokens": tokens,
            "index": index,
        })
    if not records:
        raise DataError(f"{path}: empty corpus file")
    return records


def read_lexicon_definitions(path) -> list[str]:
    """Definition ids in file order."""
    seen = set()
    order = []
    for line_no, raw in _read_jsonl(path):
        if "id" not in raw:
            raise DataError(f"{path}:{line_no}: missing field 'id'")
        definition_id = str(raw["id"])
        if definition_id in seen:
            raise DataError(f"{path}:{line_no}: duplicate id {definition_id!r}")
        seen.add(definition_id)
        order.append(definition_id)
    if not order:
        raise DataError(f"{path}: empty lexicon file")
    return order


def read_resource_vectors(path) -> dict[str, list[np.ndarray]]:
    """Per-definition sense vectors: {"definition", "vector"} lines.

    A definition may appear on several lines (one per sense vector);
    extraction averages them.
    """
    vectors: dict[str, list[np.ndarray]] = {}
    width = None
    for line_no, raw in _read_jsonl(path):
        for field in ("definition", "vector"):
            if field not in raw:
                raise DataError(f"{path}:{line_no}: missing field {field!r}")
        vector = np.asarray(raw["vector"], dtype=np.float64)
        if vector.ndim != 1 or vector.size == 0:
            raise DataError(f"{path}:{line_no}: vector must be a flat nonempty list")
        if width is None:
            width = vector.size
        elif vector.size != width:
            raise DataError(
                f"{path}:{line_no}: vector length {vector.size} != {width}")
        vectors.setdefault(str(raw["definition"]), []).append(vector)
    if not vectors:
        raise DataError(f"{path}: empty resource file")
    return vectors


def write_report(entries: list[dict], path) -> None:
    """Alignment report: one {"key", "reason"} line per dropped item."""
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")
