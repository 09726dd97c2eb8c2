"""Two-party additive secret sharing over Z_{2^l} and Beaver multiplication.

Party index 1 is A, index 2 is B.  A share holds a whole ring array (scalar,
vector or matrix) together with its decimal scale.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ring import RingParams, ScaleMismatch


class ShareError(ValueError):
    pass


class TripleReuse(ShareError):
    pass


class TripleExhausted(ShareError):
    pass


@dataclass(frozen=True)
class Share:
    value: np.ndarray
    index: int
    scale: int = 0
    ring: RingParams = RingParams()

    def __post_init__(self):
        if self.index not in (1, 2):
            raise ShareError("share index must be 1 or 2")
        object.__setattr__(self, "value", np.asarray(self.value, dtype=self.ring.dtype))

    @property
    def shape(self):
        return self.value.shape

    def with_value(self, value, scale=None) -> "Share":
        return Share(value, self.index, self.scale if scale is None else scale, self.ring)


def share(x, rng, scale: int = 0, ring: RingParams = RingParams()) -> tuple[Share, Share]:
    """Split ring value(s) ``x``: the second share is uniform, the first is ``x - s2``."""
    x = ring.reduce(x)
    s2 = ring.random(x.shape, rng)
    s1 = ring.sub(x, s2)
    return Share(s1, 1, scale, ring), Share(s2, 2, scale, ring)


def _pair(s1: Share, s2: Share) -> None:
    if {s1.index, s2.index} != {1, 2}:
        raise ShareError("reconstruction needs one share from each party")
    if s1.scale != s2.scale:
        raise ScaleMismatch(f"share scales differ: {s1.scale} vs {s2.scale}")
    if s1.ring != s2.ring:
        raise ShareError("shares live in different rings")


def reconstruct(s1: Share, s2: Share) -> np.ndarray:
    _pair(s1, s2)
    return s1.ring.add(s1.value, s2.value)


def add_shares(a: Share, b: Share) -> Share:
    if a.index != b.index:
        raise ShareError("local addition needs two shares held by the same party")
    if a.scale != b.scale:
        raise ScaleMismatch(f"cannot add shares at scales {a.scale} and {b.scale}")
    return a.with_value(a.ring.add(a.value, b.value))


def sub_shares(a: Share, b: Share) -> Share:
    if a.index != b.index:
        raise ShareError("local subtraction needs two shares held by the same party")
    if a.scale != b.scale:
        raise ScaleMismatch(f"cannot subtract shares at scales {a.scale} and {b.scale}")
    return a.with_value(a.ring.sub(a.value, b.value))


def scale_shares(a: Share, alpha: int, alpha_scale: int = 0) -> Share:
    """Multiply by a public integer; the scale grows by ``alpha_scale``."""
    return a.with_value(a.ring.mul(a.value, a.ring.scalar(alpha)), a.scale + alpha_scale)


def add_public(a: Share, value) -> Share:
    """Add a public ring value to the shared secret (only party 1 applies it)."""
    if a.index != 1:
        return a
    return a.with_value(a.ring.add(a.value, a.ring.reduce(np.asarray(value))))


def truncate_share(a: Share, to_scale: int) -> Share:
    if to_scale > a.scale:
        raise ScaleMismatch("truncation must lower the scale")
    return a.with_value(a.ring.truncate(a.value, a.scale - to_scale), to_scale)


# -- Beaver triples ------------------------------------------------------------


@dataclass
class TripleShare:
    """One party's half of a Beaver triple.

    ``kind`` is ``"mul"`` (elementwise, u, v, w of one shape) or ``"matmul"``
    (``w = u @ v``).  A triple may be used once.
    """

    kind: str
    index: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    ring: RingParams = RingParams()
    tid: int = 0
    used: bool = field(default=False, compare=False)

    def consume(self) -> "TripleShare":
        if self.used:
            raise TripleReuse(f"triple {self.tid} was already used")
        self.used = True
        return self


class Dealer:
    """Trusted dealer producing the triple stream from a seed.

    Triple ``k`` depends only on ``(seed, k)``, so the two parties can each
    regenerate the stream locally and keep their own halves.
    """

    def __init__(self, seed: int, ring: RingParams = RingParams(), limit: int | None = None):
        self.seed = seed
        self.ring = ring
        self.limit = limit

    def triple(self, k: int, kind: str, shape_u, shape_v=None) -> tuple[TripleShare, TripleShare]:
        if self.limit is not None and k >= self.limit:
            raise TripleExhausted(f"dealer stream exhausted after {self.limit} triples")
        ring = self.ring
        rng = random.Random(f"dealer:{self.seed}:{k}")
        u = ring.random(shape_u, rng)
        if kind == "mul":
            v = ring.random(shape_u, rng)
            w = ring.mul(u, v)
        elif kind == "matmul":
            v = ring.random(shape_v, rng)
            w = ring.matmul(u, v)
        else:
            raise ShareError(f"unknown triple kind {kind!r}")
        u2, v2, w2 = ring.random(u.shape, rng), ring.random(v.shape, rng), ring.random(w.shape, rng)
        one = TripleShare(kind, 1, ring.sub(u, u2), ring.sub(v, v2), ring.sub(w, w2), ring, k)
        two = TripleShare(kind, 2, u2, v2, w2, ring, k)
        return one, two

    def party_triple(self, k: int, index: int, kind: str, shape_u, shape_v=None) -> TripleShare:
        return self.triple(k, kind, shape_u, shape_v)[index - 1]


def dealer_gen_triples(count: int, kind: str, shape_u, shape_v=None, seed: int = 0, ring: RingParams = RingParams()):
    """Yield ``count`` triple pairs from a seeded dealer."""
    dealer = Dealer(seed, ring)
    for k in range(count):
        yield dealer.triple(k, kind, shape_u, shape_v)


def beaver_mul(x: Share, y: Share, triple: TripleShare, channel, step: str = "beaver") -> Share:
    """Shares of ``x * y`` (``kind == "mul"``) or ``x @ y`` (``"matmul"``).

    One round: each party opens its shares of ``e = x - u`` and ``f = y - v``.
    ``channel`` is the party's transport endpoint.  Output scale is the sum
    of the input scales.
    """
    from .protocols.transport import Tag

    if x.index != y.index or x.index != triple.index:
        raise ShareError("beaver_mul inputs must all belong to the calling party")
    triple.consume()
    ring = x.ring
    e_mine = ring.sub(x.value, triple.u)
    f_mine = ring.sub(y.value, triple.v)
    mine = ring.to_bytes(e_mine) + ring.to_bytes(f_mine)
    # fixed order so two blocking sockets never both sit in sendall
    if x.index == 1:
        channel.send(Tag.SHARE, mine, step)
        raw = channel.recv(Tag.SHARE, step)
    else:
        raw = channel.recv(Tag.SHARE, step)
        channel.send(Tag.SHARE, mine, step)
    split = e_mine.size * ring.nbytes
    if len(raw) != split + f_mine.size * ring.nbytes:
        raise ShareError("peer opened masks of the wrong size")
    e = ring.add(e_mine, ring.from_bytes(raw[:split], e_mine.shape))
    f = ring.add(f_mine, ring.from_bytes(raw[split:], f_mine.shape))
    if triple.kind == "mul":
        z = ring.add(ring.add(triple.w, ring.mul(e, triple.v)), ring.mul(triple.u, f))
        if x.index == 1:
            z = ring.add(z, ring.mul(e, f))
    else:
        z = ring.add(ring.add(triple.w, ring.matmul(e, triple.v)), ring.matmul(triple.u, f))
        if x.index == 1:
            z = ring.add(z, ring.matmul(e, f))
    return Share(z, x.index, x.scale + y.scale, ring)


# -- triple files --------------------------------------------------------------
#
# b"CAESART1" | l:u8 | index:u8 | count:u32, then per triple:
# kind:u8 (0 mul, 1 matmul) | tid:u64 | 3 x (ndim:u8 | dims:u32... ) | u | v | w
# with ring elements big-endian, l/8 bytes each.

TRIPLE_MAGIC = b"CAESART1"


def save_triples(path, triples: list[TripleShare]) -> None:
    if not triples:
        raise ShareError("no triples to save")
    ring, index = triples[0].ring, triples[0].index
    out = [TRIPLE_MAGIC, struct.pack(">BBI", ring.l, index, len(triples))]
    for t in triples:
        out.append(struct.pack(">BQ", 0 if t.kind == "mul" else 1, t.tid))
        for arr in (t.u, t.v, t.w):
            out.append(struct.pack(">B", arr.ndim) + b"".join(struct.pack(">I", s) for s in arr.shape))
        for arr in (t.u, t.v, t.w):
            out.append(ring.to_bytes(arr))
    Path(path).write_bytes(b"".join(out))


def load_triples(path) -> list[TripleShare]:
    buf = Path(path).read_bytes()
    if not buf.startswith(TRIPLE_MAGIC):
        raise ShareError("not a triple file")
    pos = len(TRIPLE_MAGIC)
    l, index, count = struct.unpack_from(">BBI", buf, pos)
    pos += 6
    ring = RingParams(l)
    triples = []
    for _ in range(count):
        kind_b, tid = struct.unpack_from(">BQ", buf, pos)
        pos += 9
        shapes = []
        for _ in range(3):
            (ndim,) = struct.unpack_from(">B", buf, pos)
            pos += 1
            dims = struct.unpack_from(">" + "I" * ndim, buf, pos)
            pos += 4 * ndim
            shapes.append(dims)
        arrs = []
        for shp in shapes:
            n = int(np.prod(shp)) * ring.nbytes
            arrs.append(ring.from_bytes(buf[pos : pos + n], shp))
            pos += n
        triples.append(TripleShare("mul" if kind_b == 0 else "matmul", index, *arrs, ring=ring, tid=tid))
    if pos != len(buf):
        raise ShareError("trailing bytes in triple file")
    return triples
