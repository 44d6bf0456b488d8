"""Binary checkpoint container.

Layout: magic ``CENV``, format version (u32 LE), then named sections.  Each
section is a u16 name length, the UTF-8 name, a u64 element count and that
many little-endian float64 values.  Sections are written in sorted name
order so identical parameter sets always serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CENV"
VERSION = 1


def save_checkpoint(path, sections: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    for name in sorted(sections):
        data = np.ascontiguousarray(sections[name], dtype="<f8").ravel()
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"section name too long: {name!r}")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<Q", data.size)
        blob += data.tobytes()
    path.write_bytes(bytes(blob))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    sections: dict[str, np.ndarray] = {}
    off = 8
    while off < len(raw):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        (count,) = struct.unpack_from("<Q", raw, off)
        off += 8
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(np.float64)
        off += 8 * count
        if name in sections:
            raise ValueError(f"{path}: duplicate section {name!r}")
        sections[name] = arr
    return sections


def checkpoint_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
