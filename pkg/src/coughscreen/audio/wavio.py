"""Minimal RIFF/WAVE reader and writer.

Reads PCM integer (8/16/24/32-bit) and IEEE float32 WAV files with 1 or 2
channels at any rate. 8-bit PCM is unsigned per the WAV spec; everything
else is signed little-endian. Writing is 16-bit PCM only.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import AudioReadError, EmptyAudioError, UnsupportedAudioError

_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


def _iter_chunks(data: bytes):
    # Yields (chunk_id, payload) for every top-level chunk after the RIFF header.
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4:pos + 8])
        payload = data[pos + 8:pos + 8 + size]
        yield cid, payload
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file.

    Returns (samples, sample_rate) where samples is float64 of shape
    [n] (mono) or [n, channels], scaled to [-1, 1].
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise AudioReadError(f"cannot read {path}: {exc}") from exc
    return read_wav_bytes(data, name=str(path))


def read_wav_bytes(data: bytes, name: str = "<memory>"
                   ) -> tuple[np.ndarray, int]:
    """Parse WAV content already in memory (uploads)."""
    path = name
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioReadError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    for cid, chunk in _iter_chunks(data):
        if cid == b"fmt " and fmt is None:
            fmt = chunk
        elif cid == b"data" and payload is None:
            payload = chunk
    if fmt is None or len(fmt) < 16:
        raise AudioReadError(f"{path}: missing or truncated fmt chunk")
    if payload is None:
        raise AudioReadError(f"{path}: missing data chunk")

    code, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if code == _FMT_EXTENSIBLE:
        # Extensible header stores the real format code in the GUID prefix.
        if len(fmt) >= 26:
            (code,) = struct.unpack("<H", fmt[24:26])
        else:
            raise AudioReadError(f"{path}: truncated extensible fmt chunk")

    if channels not in (1, 2):
        raise UnsupportedAudioError(f"{path}: {channels} channels unsupported")
    if rate <= 0:
        raise AudioReadError(f"{path}: invalid sample rate {rate}")

    if code == _FMT_PCM and bits == 8:
        raw = np.frombuffer(payload, dtype=np.uint8)
        samples = (raw.astype(np.float64) - 128.0) / 128.0
    elif code == _FMT_PCM and bits == 16:
        raw = np.frombuffer(payload[:len(payload) // 2 * 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif code == _FMT_PCM and bits == 24:
        usable = len(payload) // 3 * 3
        b = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3)
        vals = (b[:, 0].astype(np.int32)
                | (b[:, 1].astype(np.int32) << 8)
                | (b[:, 2].astype(np.int32) << 16))
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        samples = vals.astype(np.float64) / float(1 << 23)
    elif code == _FMT_PCM and bits == 32:
        raw = np.frombuffer(payload[:len(payload) // 4 * 4], dtype="<i4")
        samples = raw.astype(np.float64) / float(1 << 31)
    elif code == _FMT_FLOAT and bits == 32:
        raw = np.frombuffer(payload[:len(payload) // 4 * 4], dtype="<f4")
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedAudioError(
            f"{path}: format code {code} at {bits} bits unsupported")

    if channels == 2:
        samples = samples[:len(samples) // 2 * 2].reshape(-1, 2)
    if samples.shape[0] == 0:
        raise EmptyAudioError(f"{path}: zero-length audio")
    if not np.all(np.isfinite(samples)):
        raise AudioReadError(f"{path}: non-finite sample values")
    return samples, rate


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float samples in [-1, 1] as 16-bit PCM."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    pcm = np.clip(np.round(x * 32767.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    hdr = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, _FMT_PCM, 1, sample_rate,
        sample_rate * 2, 2, 16,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(hdr)
        fh.write(payload)
