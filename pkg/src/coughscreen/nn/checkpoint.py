"""Versioned binary model checkpoints.

Layout: magic "CKPT" | u32 version | u64 header_len | JSON header |
little-endian f32 weight payload, arrays concatenated in the order the
header declares. The header carries everything needed to score audio
without external config: architecture, featurizer settings, the
training rescale scalar, and the context encoder state.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import CheckpointError
from .models import build_model

MAGIC = b"CKPT"
VERSION = 1


@dataclass
class Checkpoint:
    kind: str                       # "cough" | "context"
    arch: dict
    weights: list[np.ndarray]
    featurizer_config: dict | None = None
    rescale: float | None = None
    encoder: dict | None = None
    meta: dict = field(default_factory=dict)

    @property
    def version_string(self) -> str:
        digest = hashlib.sha1()
        for w in self.weights:
            digest.update(np.ascontiguousarray(w, dtype="<f4").tobytes())
        epoch = self.meta.get("epoch", "?")
        return f"{self.kind}-v{VERSION}-e{epoch}-{digest.hexdigest()[:8]}"

    def build_model(self):
        model = build_model(self.kind, self.arch)
        model.set_weights(self.weights)
        return model


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    arrays = [np.ascontiguousarray(w, dtype="<f4") for w in ckpt.weights]
    header = {
        "kind": ckpt.kind,
        "arch": ckpt.arch,
        "params": [{"shape": list(a.shape)} for a in arrays],
        "featurizer": ckpt.featurizer_config,
        "rescale": ckpt.rescale,
        "encoder": ckpt.encoder,
        "meta": ckpt.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(a.tobytes())


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if len(data) < 16 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad checkpoint magic")
    version, header_len = struct.unpack("<IQ", data[4:16])
    if version != VERSION:
        raise CheckpointError(f"{path}: version {version} unsupported "
                              f"(expected {VERSION})")
    if len(data) < 16 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc

    payload = data[16 + header_len:]
    expected = sum(int(np.prod(p["shape"])) for p in header["params"]) * 4
    if len(payload) != expected:
        raise CheckpointError(f"{path}: payload is {len(payload)} bytes, "
                              f"expected {expected}")
    weights = []
    offset = 0
    for p in header["params"]:
        shape = tuple(p["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=count,
                            offset=offset).reshape(shape).copy()
        weights.append(arr)
        offset += count * 4
    return Checkpoint(
        kind=header["kind"],
        arch=header["arch"],
        weights=weights,
        featurizer_config=header.get("featurizer"),
        rescale=header.get("rescale"),
        encoder=header.get("encoder"),
        meta=header.get("meta", {}),
    )
