"""Binary parameter file format.

Layout: magic b"NSTP1\\n", then one record per parameter in set order
(name length u32 LE, UTF-8 name, rank u32, dims u32 each, values f64 LE
row-major), then CRC32 of the record bytes as u32 LE. Round trips are
byte-exact.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import FormatError
from .nncore import ParameterSet

MAGIC = b"NSTP1\n"


def save_parameters(params: ParameterSet, path) -> None:
    for p in params:
        if not np.isfinite(p.value).all():
            raise ValueError(f"parameter {p.name!r} contains non-finite values")
    body = bytearray()
    for p in params:
        name = p.name.encode("utf-8")
        body += struct.pack("<I", len(name))
        body += name
        body += struct.pack("<I", p.value.ndim)
        for d in p.value.shape:
            body += struct.pack("<I", d)
        body += np.ascontiguousarray(p.value, dtype="<f8").tobytes()
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes(body))
        fh.write(struct.pack("<I", crc))


def load_parameters(path) -> ParameterSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4:
        raise FormatError(f"truncated file at byte {len(blob)}: shorter than header")
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError("bad magic at byte 0")
    records = blob[len(MAGIC):-4]
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(records) & 0xFFFFFFFF != stored_crc:
        raise FormatError(f"CRC mismatch at byte {len(blob) - 4}")

    params = ParameterSet()
    pos = 0
    base = len(MAGIC)

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(records):
            raise FormatError(f"truncated {what} at byte {base + pos}")
        chunk = records[pos:pos + n]
        pos += n
        return chunk

    while pos < len(records):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        if rank > 32:
            raise FormatError(f"implausible rank {rank} at byte {base + pos - 4}")
        dims = [struct.unpack("<I", take(4, "dim"))[0] for _ in range(rank)]
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw = take(8 * count, f"values of {name!r}")
        value = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
        params.add(name, value)
    return params
