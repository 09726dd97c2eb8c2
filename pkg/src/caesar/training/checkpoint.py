"""Share-state checkpoints.

Layout::

    b"CAESARC1" | version:u16 | role:u8 | l:u8 | c:u8 | n_snapshots:u8
    per snapshot: step:u64 | n_arrays:u8
        per array: name_len:u8 | name | count:u32 | count ring elements (BE)

A party keeps its last two committed snapshots so the two sides can agree on
a common batch boundary after a failure in the middle of a batch.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..ring import RingParams

MAGIC = b"CAESARC1"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Snapshot:
    step: int
    arrays: dict = field(default_factory=dict)


@dataclass
class Checkpoint:
    role: str
    l: int
    c: int
    snapshots: list

    def steps(self) -> list[int]:
        return [s.step for s in self.snapshots]

    def at(self, step: int) -> Snapshot:
        for s in self.snapshots:
            if s.step == step:
                return s
        raise CheckpointError(f"no snapshot at step {step}")


def dumps(ck: Checkpoint) -> bytes:
    ring = RingParams(ck.l)
    out = [MAGIC, struct.pack(">HBBBB", VERSION, ord(ck.role), ck.l, ck.c, len(ck.snapshots))]
    for snap in ck.snapshots:
        out.append(struct.pack(">QB", snap.step, len(snap.arrays)))
        for name, arr in snap.arrays.items():
            raw = name.encode()
            arr = np.asarray(arr, dtype=ring.dtype).ravel()
            out.append(struct.pack(">B", len(raw)) + raw + struct.pack(">I", arr.size) + ring.to_bytes(arr))
    return b"".join(out)


def loads(buf: bytes) -> Checkpoint:
    if not buf.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file")
    try:
        pos = len(MAGIC)
        version, role, l, c, count = struct.unpack_from(">HBBBB", buf, pos)
        pos += 6
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        ring = RingParams(l)
        snaps = []
        for _ in range(count):
            step, n_arr = struct.unpack_from(">QB", buf, pos)
            pos += 9
            arrays = {}
            for _ in range(n_arr):
                (nlen,) = struct.unpack_from(">B", buf, pos)
                pos += 1
                name = buf[pos : pos + nlen].decode()
                pos += nlen
                (size,) = struct.unpack_from(">I", buf, pos)
                pos += 4
                nbytes = size * ring.nbytes
                if pos + nbytes > len(buf):
                    raise CheckpointError("truncated checkpoint: array data cut short")
                arrays[name] = ring.from_bytes(buf[pos : pos + nbytes], (size,))
                pos += nbytes
            snaps.append(Snapshot(step, arrays))
        if pos != len(buf):
            raise CheckpointError("trailing bytes after the last snapshot")
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from exc
    return Checkpoint(chr(role), l, c, snaps)


def save(path, ck: Checkpoint) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(ck))
    os.replace(tmp, path)


def load(path) -> Checkpoint:
    return loads(Path(path).read_bytes())
