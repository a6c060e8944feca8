"""Single-file checkpoints: a JSON manifest followed by raw float64 arrays.

Layout: magic ``MCKP``, format version (u32 LE), manifest length (u64 LE),
UTF-8 JSON manifest, then each array's bytes (little-endian float64,
C order) in manifest order.  The manifest carries everything non-numeric:
model kind, run configuration, step and phase counters, optimizer scalars,
and rng states.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError
from .optim import AdamWState

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint", "checkpoints_equal"]

_MAGIC = b"MCKP"
_VERSION = 1


@dataclass
class Checkpoint:
    model_kind: str
    config: dict
    step: int
    phase: int
    params: dict[str, np.ndarray]
    opt: AdamWState | None = None
    rng_states: dict = field(default_factory=dict)


def _array_entries(ck: Checkpoint):
    for name, arr in ck.params.items():
        yield "params", name, arr
    if ck.opt is not None:
        for name in ck.params:
            yield "opt_m", name, ck.opt.m[name]
        for name in ck.params:
            yield "opt_v", name, ck.opt.v[name]


def save_checkpoint(ck: Checkpoint, path) -> None:
    arrays = []
    payload = bytearray()
    for section, name, arr in _array_entries(ck):
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        arrays.append({"section": section, "name": name, "shape": list(arr.shape)})
        payload += arr.astype("<f8", copy=False).tobytes()
    opt = None
    if ck.opt is not None:
        opt = {
            "step_count": ck.opt.step_count,
            "lr": ck.opt.lr,
            "beta1": ck.opt.beta1,
            "beta2": ck.opt.beta2,
            "eps": ck.opt.eps,
            "weight_decay": ck.opt.weight_decay,
        }
    manifest = {
        "model_kind": ck.model_kind,
        "config": ck.config,
        "step": ck.step,
        "phase": ck.phase,
        "opt": opt,
        "rng_states": ck.rng_states,
        "arrays": arrays,
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (blob_len,) = struct.unpack_from("<Q", raw, 8)
    start = 16
    try:
        manifest = json.loads(raw[start:start + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable checkpoint manifest: {exc}") from exc
    offset = start + blob_len
    params: dict[str, np.ndarray] = {}
    opt_m: dict[str, np.ndarray] = {}
    opt_v: dict[str, np.ndarray] = {}
    sections = {"params": params, "opt_m": opt_m, "opt_v": opt_v}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise FormatError(f"{path}: checkpoint payload truncated")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        sections[entry["section"]][entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes after payload")
    opt = None
    if manifest["opt"] is not None:
        o = manifest["opt"]
        opt = AdamWState(o["lr"], o["beta1"], o["beta2"], o["eps"], o["weight_decay"])
        opt.step_count = o["step_count"]
        opt.m = opt_m
        opt.v = opt_v
    return Checkpoint(
        model_kind=manifest["model_kind"],
        config=manifest["config"],
        step=manifest["step"],
        phase=manifest["phase"],
        params=params,
        opt=opt,
        rng_states=manifest["rng_states"],
    )


def checkpoints_equal(a: Checkpoint, b: Checkpoint) -> bool:
    """Bitwise equality, used to verify save/load round trips."""
    if (a.model_kind, a.step, a.phase) != (b.model_kind, b.step, b.phase):
        return False
    if a.config != b.config or a.rng_states != b.rng_states:
        return False
    if sorted(a.params) != sorted(b.params):
        return False
    for name, arr in a.params.items():
        other = b.params[name]
        if arr.shape != other.shape or arr.tobytes() != other.tobytes():
            return False
    if (a.opt is None) != (b.opt is None):
        return False
    if a.opt is not None:
        for attr in ("step_count", "lr", "beta1", "beta2", "eps", "weight_decay"):
            if getattr(a.opt, attr) != getattr(b.opt, attr):
                return False
        for name in a.params:
            if a.opt.m[name].tobytes() != b.opt.m[name].tobytes():
                return False
            if a.opt.v[name].tobytes() != b.opt.v[name].tobytes():
                return False
    return True
