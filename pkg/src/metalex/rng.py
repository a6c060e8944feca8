"""Named, splittable random streams on top of the Philox counter-based generator.

Every source of randomness in the library draws from a stream addressed by a
path of names under one root seed, e.g. ``root.split("dropout")`` or
``root.split("init").split("mpd")``.  Distinct paths give statistically
independent streams, so adding draws to one stream (say, extra dev-set
evaluations) can never perturb another.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["RngStream"]


def _name_key(name: str) -> int:
    # Stable 32-bit key for a stream name; PYTHONHASHSEED-independent.
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


class RngStream:
    """A seeded Philox stream that can be split into named children."""

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = _path
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.Philox(seq))

    def split(self, name: str) -> "RngStream":
        """Derive the independent child stream addressed by ``name``."""
        return RngStream(self.seed, self.path + (_name_key(name),))

    def state(self) -> dict:
        """JSON-serializable snapshot of the stream position."""
        raw = self.gen.bit_generator.state
        return {
            "seed": self.seed,
            "path": list(self.path),
            "counter": [int(x) for x in raw["state"]["counter"]],
            "key": [int(x) for x in raw["state"]["key"]],
            "buffer": [int(x) for x in raw["buffer"]],
            "buffer_pos": int(raw["buffer_pos"]),
            "has_uint32": int(raw["has_uint32"]),
            "uinteger": int(raw["uinteger"]),
        }

    @classmethod
    def from_state(cls, state: dict) -> "RngStream":
        stream = cls(state["seed"], tuple(state["path"]))
        raw = stream.gen.bit_generator.state
        raw["state"]["counter"] = np.array(state["counter"], dtype=np.uint64)
        raw["state"]["key"] = np.array(state["key"], dtype=np.uint64)
        raw["buffer"] = np.array(state["buffer"], dtype=np.uint64)
        raw["buffer_pos"] = state["buffer_pos"]
        raw["has_uint32"] = state["has_uint32"]
        raw["uinteger"] = state["uinteger"]
        stream.gen.bit_generator.state = raw
        return stream

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"
