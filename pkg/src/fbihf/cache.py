"""Versioned binary cache for Bloch bundles and form-factor tables.

Frame layout: magic b"FBI1" | version (u32 LE) | config hash (32 bytes,
sha256 of the canonical key string) | payload checksum (sha256, 32 bytes) |
payload (npz bytes).  Files are written atomically (tmp + rename).  A bad
magic, length, or checksum raises CacheError; a version or key mismatch is
reported as a miss so callers rebuild, never partially read.
"""

from __future__ import annotations

import hashlib
import io
import os

import numpy as np

from .errors import CacheError

MAGIC = b"FBI1"
VERSION = 1


def key_hash(fields: dict) -> bytes:
    canonical = "\n".join(f"{k}={fields[k]}" for k in sorted(fields))
    return hashlib.sha256(canonical.encode("utf-8")).digest()


def save_cache(path, fields: dict, arrays: dict) -> None:
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    payload = buf.getvalue()
    frame = (MAGIC + VERSION.to_bytes(4, "little") + key_hash(fields)
             + hashlib.sha256(payload).digest() + payload)
    tmp = f"{path}.tmp.{os.getpid()}"
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    with open(tmp, "wb") as fh:
        fh.write(frame)
    os.replace(tmp, path)


def load_cache(path, fields: dict) -> dict | None:
    """Return the arrays dict, or None on miss (absent/stale version/key)."""
    if not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        frame = fh.read()
    if len(frame) < 72 or frame[:4] != MAGIC:
        raise CacheError(f"cache file {path} is corrupt (bad header)")
    version = int.from_bytes(frame[4:8], "little")
    if version != VERSION:
        return None
    if frame[8:40] != key_hash(fields):
        return None
    payload = frame[72:]
    if hashlib.sha256(payload).digest() != frame[40:72]:
        raise CacheError(f"cache file {path} is corrupt (checksum mismatch)")
    with np.load(io.BytesIO(payload)) as npz:
        return {name: npz[name] for name in npz.files}
