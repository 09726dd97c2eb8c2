"""Baseline: the same logistic regression on densely secret-shared data.

Both feature blocks and the labels are shared once at setup, after which
every matrix product is a Beaver multiplication with a dealer triple.  The
sigmoid is the same odd cubic as the secure sparse trainer, so the models
are directly comparable; the point of the baseline is its communication,
which scales with ``|B| * d`` per batch because sharing densifies ``X``.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass

import numpy as np

from ..protocols.transport import Endpoint, Tag, TransportError, in_proc_pair
from ..ring import RingParams
from ..sharing import Dealer, Share, beaver_mul, share
from ..sparse import SparseMatrix
from .caesar import schedule_iter
from .config import TrainConfig
from .reference import alpha_fixed, fixed_coeffs


@dataclass
class BaselineResult:
    w_a: np.ndarray
    w_b: np.ndarray
    stats_a: object
    stats_b: object
    triples_used: int
    wall_s: float = 0.0


class _BaselineParty:
    def __init__(self, index: int, ep: Endpoint, X: SparseMatrix, y, cfg: TrainConfig, dealer: Dealer, rng=None):
        self.index = index
        self.ep = ep
        self.cfg = cfg
        self.ring: RingParams = cfg.ring
        self.X = X.encode(cfg.c, self.ring) if X.ring is None else X
        self.y = None if y is None else np.asarray(y, dtype=np.int64)
        self.dealer = dealer
        self.rng = rng if rng is not None else random.SystemRandom()
        self.k = 0
        self.Q = fixed_coeffs(cfg.sigmoid(), cfg.c)
        self.result = None

    def _sh(self, value, scale=None) -> Share:
        return Share(value, self.index, self.cfg.c if scale is None else scale, self.ring)

    def _triple(self, kind, shape_u, shape_v=None):
        t = self.dealer.party_triple(self.k, self.index, kind, shape_u, shape_v)
        self.k += 1
        return t

    def _mul(self, x: Share, y: Share, kind: str, step: str) -> Share:
        t = self._triple(kind, x.shape, y.shape if kind == "matmul" else None)
        return beaver_mul(x, y, t, self.ep, step)

    def _trunc(self, s: Share, digits: int) -> Share:
        return s.with_value(self.ring.truncate(s.value, digits), s.scale - digits)

    def _exchange(self, mine: np.ndarray, peer_shape, step: str) -> np.ndarray:
        """Send our share of our own data; receive the peer's share of theirs."""
        ring = self.ring
        if self.index == 1:
            self.ep.send(Tag.SHARE, ring.to_bytes(mine), step)
            return ring.from_bytes(self.ep.recv(Tag.SHARE, step), peer_shape)
        raw = self.ep.recv(Tag.SHARE, step)
        self.ep.send(Tag.SHARE, ring.to_bytes(mine), step)
        return ring.from_bytes(raw, peer_shape)

    def run(self):
        ring, c, ep = self.ring, self.cfg.c, self.ep
        n, d_mine = self.X.shape
        ep.send_control({"n": n, "d": d_mine}, "hello")
        peer = ep.recv_control("hello")
        if peer["n"] != n:
            raise ValueError("parties disagree on the sample count")
        d_peer = int(peer["d"])
        dense = self.X.to_dense()
        s1, s2 = share(dense, self.rng, c, ring)
        keep, give = (s1, s2) if self.index == 1 else (s2, s1)
        theirs = self._exchange(give.value, (n, d_peer), "share:X")
        # column order is always [X_a | X_b]
        blocks = [keep.value, theirs] if self.index == 1 else [theirs, keep.value]
        X = np.concatenate(blocks, axis=1) if n else ring.zeros((0, d_mine + d_peer))
        # labels live at party 2
        if self.index == 2:
            t1, t2 = share(ring.reduce(self.y * 10**c), self.rng, c, ring)
            ep.send(Tag.SHARE, ring.to_bytes(t1.value), "share:y")
            ys = t2.value
        else:
            ys = ring.from_bytes(ep.recv(Tag.SHARE, "share:y"), (n,))
        d = X.shape[1]
        w = self._sh(ring.zeros((d, 1)))
        Q0, Q1, Q2 = self.Q
        for step, epoch, k, idx in schedule_iter(n, self.cfg.batch, self.cfg.epochs, self.cfg.seed):
            ep.stats.set_context(epoch, k)
            m = len(idx)
            XB = self._sh(X[idx])
            z = self._trunc(self._mul(XB, w, "matmul", "z"), c)
            z2 = self._trunc(self._mul(z, z, "mul", "z^2"), c)
            z3 = self._trunc(self._mul(z2, z, "mul", "z^3"), c)
            lin = ring.add(ring.mul(z.value, ring.scalar(Q1)), ring.mul(z3.value, ring.scalar(Q2)))
            yhat = self._trunc(self._sh(lin, 2 * c), c)
            if self.index == 1:
                yhat = yhat.with_value(ring.add(yhat.value, ring.scalar(Q0)))
            e = yhat.with_value(ring.sub(yhat.value, ys[idx].reshape(-1, 1)))
            eT = e.with_value(e.value.reshape(1, m))
            g = self._trunc(self._mul(eT, XB, "matmul", "g"), c)
            a_eff = alpha_fixed(self.cfg.alpha, m, c)
            upd = ring.truncate(ring.mul(g.value.reshape(-1, 1), ring.scalar(a_eff)), 2 * c)
            w = w.with_value(ring.sub(w.value, upd))
        ep.stats.set_context(-2, -2)
        other = self._exchange(w.value.ravel(), (d,), "reveal:w")
        self.result = ring.add(w.value.ravel(), other)
        self.d_a = d_mine if self.index == 1 else d_peer
        return self.result


def secureml_baseline_train(
    X_a: SparseMatrix,
    X_b: SparseMatrix,
    y,
    cfg: TrainConfig,
    dealer: Dealer | None = None,
    rng_seed: int | None = None,
) -> BaselineResult:
    """Run both baseline parties as threads over an in-process channel."""
    dealer = dealer or Dealer(cfg.seed, cfg.ring)
    ep_a, ep_b = in_proc_pair()
    rng = lambda tag: random.Random(f"{tag}:{rng_seed}") if rng_seed is not None else None
    pa = _BaselineParty(1, ep_a, X_a, None, cfg, dealer, rng("A"))
    pb = _BaselineParty(2, ep_b, X_b, y, cfg, dealer, rng("B"))
    errors = {}

    def target(p, name):
        try:
            p.run()
        except BaseException as exc:
            errors[name] = exc
            p.ep.close()

    t0 = time.perf_counter()
    threads = [threading.Thread(target=target, args=(p, r)) for p, r in ((pa, "A"), (pb, "B"))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for name in ("A", "B"):
        if name in errors and not isinstance(errors[name], TransportError):
            raise errors[name]
    if errors:
        raise next(iter(errors.values()))
    ring = cfg.ring
    w = ring.signed(pa.result).astype(np.float64) / 10**cfg.c
    return BaselineResult(w[: X_a.cols], w[X_a.cols :], ep_a.stats, ep_b.stats, pa.k, time.perf_counter() - t0)
