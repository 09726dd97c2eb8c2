"""Two-party training of a vertically partitioned sparse logistic regression.

Party A holds ``X_a``; party B holds ``X_b`` and the labels.  The model is
kept as additive shares for the whole run: A holds ``<w_a>_1, <w_b>_1`` and
B holds ``<w_a>_2, <w_b>_2``.  Products of a party's sparse features with the
other party's model share go through :mod:`caesar.protocols.twoparty`.

Scale schedule (c = decimal digits): features and weights at c, so
``X w`` lands at 2c and is truncated to c.  B evaluates the cubic at 4c
(``q0 10^{3c} + q1 10^{2c} z + q2 z^3``); sharing ``yhat`` divides by
``10^{3c}`` on the way out, sharing ``g_b = e^T X_b`` (5c) divides by
``10^{4c}``.  ``g_a`` stays at 2c until both shares are truncated locally.
Updates use ``alpha / |B|`` at scale 2c, truncated from 3c back to c.

Per batch the parties exchange ``7|B| + 2d`` ciphertexts plus one control
message from A.
"""

from __future__ import annotations

import itertools
import random
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..he.core import HEParams, KeyPair, Scheme
from ..he.keyfile import dumps_key, loads_key
from ..he.matrix import EncryptedMatrix, WorkerPool
from ..protocols.transport import Endpoint, ProtocolError, Tag, TransportError, virtual_seconds
from ..protocols.twoparty import (
    ProtocolParams,
    encrypt_and_send,
    recv_ciphertexts,
    sshef_decryptor,
    sshef_holder,
    ssmm_dense_side,
    ssmm_sparse_side,
)
from ..ring import RingParams, encode_array
from ..sharing import share
from ..sparse import OpCounter, SparseMatrix, accumulation_bits, csr_matmul_ring, vec_csr_ring, vec_spmm_encrypted
from . import checkpoint as ckpt
from .config import TrainConfig, epoch_order
from .reference import alpha_fixed, fixed_coeffs

# hyper-parameters both parties must agree on
_AGREED = ("alpha", "batch", "c", "l", "sigma", "seed", "epochs")


def schedule_iter(n: int, batch: int, epochs: int | None, seed: int):
    """``(step, epoch, batch_index, sample_indices)``; endless when ``epochs`` is None."""
    step = 0
    for epoch in itertools.count() if epochs is None else range(epochs):
        perm = epoch_order(n, seed, epoch)
        for k, i in enumerate(range(0, n, batch)):
            yield step, epoch, k, perm[i : i + batch]
            step += 1


def cube_from_powers(pk, E1, E2, E3, t: int):
    """``[[(s + t)^3]]`` from ``[[s]], [[s^2]], [[s^3]]`` and a plaintext ``t``."""
    acc = pk.raw_add(E3, pk.raw_mul_plain(E2, 3 * t))
    acc = pk.raw_add(acc, pk.raw_mul_plain(E1, 3 * t * t))
    return pk.raw_add_plain(acc, t**3)


class _Party:
    role = "?"

    def __init__(
        self,
        X: SparseMatrix,
        endpoint: Endpoint,
        keypair: KeyPair,
        cfg: TrainConfig,
        rng=None,
        pool: WorkerPool | None = None,
        stop_event: threading.Event | None = None,
        log=None,
        checkpoint_path=None,
        resume_from=None,
        until_stopped: bool = False,
        diagnostics: bool = False,
        init_w=None,
    ):
        self.cfg = cfg
        self.ring: RingParams = cfg.ring
        self.c = cfg.c
        self.X = X.encode(cfg.c, self.ring) if X.ring is None else X
        self.n, self.d = X.shape
        self.ep = endpoint
        self.kp = keypair
        self.rng = rng if rng is not None else random.SystemRandom()
        self.pool = pool or WorkerPool(cfg.workers)
        self.stop_event = stop_event or threading.Event()
        self.log = log or (lambda rec: None)
        self.checkpoint_path = checkpoint_path
        self.resume = ckpt.load(resume_from) if resume_from else None
        self.until_stopped = until_stopped
        self.diagnostics = diagnostics
        self.trace: list = []
        self.counter = OpCounter()
        self.peer_pk = None
        self.params = None
        self.snapshots: list = []
        self.step = 0
        self.Q = fixed_coeffs(cfg.sigmoid(), cfg.c)
        self.result_weights = None
        # own block of the initial model (zero unless given)
        self.init_w = self.ring.zeros(self.d) if init_w is None else encode_array(init_w, cfg.c, self.ring)
        if self.init_w.shape != (self.d,):
            raise ValueError("initial weights do not match the feature count")

    # -- setup ---------------------------------------------------------------

    def _hello(self) -> dict:
        msg = {k: getattr(self.cfg, k) for k in _AGREED}
        msg.update(role=self.role, n=self.n, d=self.d, scheme=self.kp.pk.scheme.name, until_stopped=self.until_stopped)
        return msg

    def _check_hello(self, peer: dict) -> None:
        for k in _AGREED:
            if peer.get(k) != getattr(self.cfg, k):
                raise ProtocolError(f"peer disagrees on {k}: {peer.get(k)!r} vs {getattr(self.cfg, k)!r}")
        if peer.get("n") != self.n:
            raise ProtocolError(f"peer has {peer.get('n')} samples, we have {self.n}")
        if peer.get("scheme") != self.kp.pk.scheme.name:
            raise ProtocolError("parties use different HE schemes")

    def _exchange_keys(self, first: bool) -> None:
        mine = dumps_key(self.kp.pk)
        if first:
            self.ep.send(Tag.CONTROL, mine, "pk")
            raw = self.ep.recv(Tag.CONTROL, "pk")
        else:
            raw = self.ep.recv(Tag.CONTROL, "pk")
            self.ep.send(Tag.CONTROL, mine, "pk")
        self.peer_pk = loads_key(raw)
        if self.peer_pk.scheme is not self.kp.pk.scheme:
            raise ProtocolError("peer key uses a different scheme")
        bits = min(self.kp.pk.key_bits, self.peer_pk.key_bits)
        self.params = ProtocolParams(self.ring, HEParams(self.kp.pk.scheme, bits), self.cfg.sigma)

    # -- state --------------------------------------------------------------

    def _state(self) -> dict:
        raise NotImplementedError

    def _restore(self, arrays: dict) -> None:
        raise NotImplementedError

    def _commit(self, step: int) -> None:
        snap = ckpt.Snapshot(step, {k: np.array(v, copy=True) for k, v in self._state().items()})
        self.snapshots = (self.snapshots + [snap])[-2:]

    def save_checkpoint(self, path=None) -> None:
        path = path or self.checkpoint_path
        if path is None or not self.snapshots:
            return
        ckpt.save(path, ckpt.Checkpoint(self.role, self.ring.l, self.c, list(self.snapshots)))

    def _agree_resume(self, mine, theirs) -> int | None:
        if mine is None and theirs is None:
            return None
        if mine is None or theirs is None:
            raise ProtocolError("only one party is resuming from a checkpoint")
        common = sorted(set(mine) & set(theirs))
        if not common:
            raise ProtocolError(f"checkpoints share no batch boundary ({mine} vs {theirs})")
        return common[-1]

    # -- helpers ------------------------------------------------------------

    def _trunc(self, values, digits: int) -> np.ndarray:
        return self.ring.truncate(values, digits)

    def _update(self, w: np.ndarray, g: np.ndarray, m: int) -> np.ndarray:
        a_eff = alpha_fixed(self.cfg.alpha, m, self.c)
        step = self._trunc(self.ring.mul(g, self.ring.scalar(a_eff)), 2 * self.c)
        return self.ring.sub(w, step)

    def _schedule(self, start: int):
        epochs = None if self.until_stopped else self.cfg.epochs
        it = schedule_iter(self.n, self.cfg.batch, epochs, self.cfg.seed)
        return itertools.islice(it, start, None)

    def _log_batch(self, epoch, k, step, t0, sent0):
        sent = self.ep.stats.select()[sent0:]
        nbytes = sum(m.byte_len for m in sent)
        frames = sum(m.frame_len for m in sent)
        rec = {
            "event": "batch",
            "role": self.role,
            "epoch": epoch,
            "batch": k,
            "step": step,
            "bytes_sent": nbytes,
            "wall_s": time.perf_counter() - t0,
        }
        if self.cfg.bandwidth_mbps:
            rec["virtual_s"] = virtual_seconds(frames, self.cfg.bandwidth_mbps)
        self.log(rec)

    def run(self):
        try:
            return self._run()
        except TransportError:
            self.save_checkpoint()
            raise
        finally:
            self.pool.close()


class PartyA(_Party):
    """Feature-only party; drives the batch loop."""

    role = "A"

    def _state(self):
        return {"w_a1": self.wa1, "w_b1": self.wb1}

    def _restore(self, arrays):
        self.wa1, self.wb1 = arrays["w_a1"], arrays["w_b1"]

    def _run(self):
        ep, ring = self.ep, self.ring
        ep.send_control(self._hello(), "hello")
        peer = ep.recv_control("hello")
        self._check_hello(peer)
        self.d_b = int(peer["d"])
        self._exchange_keys(first=True)

        mine = self.resume.steps() if self.resume else None
        ep.send_control({"op": "start", "resume": mine}, "start")
        theirs = ep.recv_control("start").get("resume")
        start = self._agree_resume(mine, theirs)
        if start is None:
            # secretly share w_a; receive <w_b>_1
            s1, s2 = share(self.init_w, self.rng, self.c, ring)
            self.wa1 = s1.value
            ep.send(Tag.SHARE, ring.to_bytes(s2.value), "share:w_a")
            self.wb1 = ring.from_bytes(ep.recv(Tag.SHARE, "share:w_b"), (self.d_b,))
            start = 0
        else:
            self._restore(self.resume.at(start).arrays)
        self._commit(start)
        self.step = start

        step = start
        n_batches = -(-self.n // self.cfg.batch)
        for step, epoch, k, idx in self._schedule(start):
            if self.stop_event.is_set():
                break
            ep.stats.set_context(epoch, k)
            t0, sent0 = time.perf_counter(), len(ep.stats.sent)
            ep.send_control({"op": "batch", "step": step, "epoch": epoch, "batch": k}, "batch")
            self._batch(idx)
            self._commit(step + 1)
            self._log_batch(epoch, k, step, t0, sent0)
            step += 1
            if k == n_batches - 1:
                self.log({"event": "epoch_end", "role": "A", "epoch": epoch, "step": step})
        ep.stats.set_context(-2, -2)
        ep.send_control({"op": "stop", "step": step}, "stop")
        # reconstruct: send <w_b>_1 to B, receive <w_a>_2
        ep.send(Tag.SHARE, ring.to_bytes(self.wb1), "reveal:w_b")
        wa2 = ring.from_bytes(ep.recv(Tag.SHARE, "reveal:w_a"), (self.d,))
        self.result_weights = ring.add(self.wa1, wa2)
        self.steps_done = step
        return self.result_weights

    def _batch(self, idx):
        ep, ring, c, P = self.ep, self.ring, self.c, self.params
        Xa = self.X.take_rows(idx)
        m = len(idx)
        # z_a = X_a <w_a>_1 locally, X_a <w_a>_2 and X_b <w_b>_1 through ssmm
        za1 = csr_matmul_ring(Xa, self.wa1, ring)
        zza = ssmm_sparse_side(ep, self.peer_pk, Xa, (self.d, 1), P, self.rng, "right", pool=self.pool, counter=self.counter, step="z_a")
        zzb = ssmm_dense_side(ep, self.kp, self.wb1.reshape(-1, 1), (m, 1), P, self.rng, self.pool, step="z_b")
        z1 = self._trunc(ring.add(ring.add(za1, zza.ravel()), zzb.ravel()), c)
        s = ring.signed_ints(z1)
        for p in (1, 2, 3):
            encrypt_and_send(ep, self.kp.pk, [v**p for v in s], self.rng, self.pool, step=f"z^{p}")
        e1 = sshef_decryptor(ep, self.kp, (m, 1), P, divisor=10 ** (3 * c), step="yhat").ravel()
        if self.diagnostics:
            self.trace.append((self.step, idx, e1.copy()))
        gb1 = sshef_decryptor(ep, self.kp, (1, self.d_b), P, divisor=10 ** (4 * c), step="g_b").ravel()
        ga1 = vec_csr_ring(e1, Xa, ring)
        gga1 = ssmm_sparse_side(ep, self.peer_pk, Xa, (m, 1), P, self.rng, "left", pool=self.pool, counter=self.counter, step="g_a")
        gA = self._trunc(ring.add(ga1, gga1.ravel()), c)
        self.wa1 = self._update(self.wa1, gA, m)
        self.wb1 = self._update(self.wb1, gb1, m)
        self.step += 1


class PartyB(_Party):
    """Feature and label party."""

    role = "B"

    def __init__(self, X, y, *args, **kwargs):
        super().__init__(X, *args, **kwargs)
        y = np.asarray(y)
        if y.shape[0] != self.n:
            raise ValueError("labels and features disagree on the sample count")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0/1")
        self.y = y.astype(np.int64)

    def _state(self):
        return {"w_a2": self.wa2, "w_b2": self.wb2}

    def _restore(self, arrays):
        self.wa2, self.wb2 = arrays["w_a2"], arrays["w_b2"]

    def _run(self):
        ep, ring = self.ep, self.ring
        peer = ep.recv_control("hello")
        self._check_hello(peer)
        self.d_a = int(peer["d"])
        self.until_stopped = bool(peer.get("until_stopped", False))
        ep.send_control(self._hello(), "hello")
        self._exchange_keys(first=False)

        theirs = ep.recv_control("start").get("resume")
        mine = self.resume.steps() if self.resume else None
        ep.send_control({"op": "start", "resume": mine}, "start")
        start = self._agree_resume(mine, theirs)
        if start is None:
            self.wa2 = ring.from_bytes(ep.recv(Tag.SHARE, "share:w_a"), (self.d_a,))
            s1, s2 = share(self.init_w, self.rng, self.c, ring)
            self.wb2 = s2.value
            ep.send(Tag.SHARE, ring.to_bytes(s1.value), "share:w_b")
            start = 0
        else:
            self._restore(self.resume.at(start).arrays)
        self._commit(start)
        self.step = start

        step = start
        for exp_step, epoch, k, idx in self._schedule(start):
            msg = ep.recv_control("batch")
            if msg.get("op") == "stop":
                step = int(msg["step"])
                break
            if msg.get("op") != "batch" or msg.get("step") != exp_step:
                raise ProtocolError(f"out of step: expected batch {exp_step}, got {msg}")
            ep.stats.set_context(epoch, k)
            t0, sent0 = time.perf_counter(), len(ep.stats.sent)
            self._batch(idx)
            self._commit(exp_step + 1)
            self._log_batch(epoch, k, exp_step, t0, sent0)
            step = exp_step + 1
        else:
            msg = ep.recv_control("stop")
            if msg.get("op") != "stop":
                raise ProtocolError(f"expected stop, got {msg}")
        ep.stats.set_context(-2, -2)
        wb1 = ring.from_bytes(ep.recv(Tag.SHARE, "reveal:w_b"), (self.d,))
        ep.send(Tag.SHARE, ring.to_bytes(self.wa2), "reveal:w_a")
        self.result_weights = ring.add(wb1, self.wb2)
        self.steps_done = step
        return self.result_weights

    def _yhat_bound(self) -> int:
        l = self.ring.l
        Q0, Q1, Q2 = self.Q
        s2, s3 = 10 ** (2 * self.c), 10 ** (3 * self.c)
        # |<z>_1 + <z>_2| < 2^l as signed shares
        return max(3 * l + abs(Q2).bit_length(), l + abs(Q1 * s2).bit_length(), abs(Q0 * s3).bit_length()) + 2

    def _batch(self, idx):
        ep, ring, c, P = self.ep, self.ring, self.c, self.params
        pk_a = self.peer_pk
        Xb = self.X.take_rows(idx)
        y = self.y[idx]
        m = len(idx)
        zb2 = csr_matmul_ring(Xb, self.wb2, ring)
        zza = ssmm_dense_side(ep, self.kp, self.wa2.reshape(-1, 1), (m, 1), P, self.rng, self.pool, step="z_a")
        zzb = ssmm_sparse_side(ep, pk_a, Xb, (self.d, 1), P, self.rng, "right", pool=self.pool, counter=self.counter, step="z_b")
        z2 = self._trunc(ring.add(ring.add(zb2, zza.ravel()), zzb.ravel()), c)
        t = ring.signed_ints(z2)
        E1 = recv_ciphertexts(ep, pk_a, m, step="z^1")
        E2 = recv_ciphertexts(ep, pk_a, m, step="z^2")
        E3 = recv_ciphertexts(ep, pk_a, m, step="z^3")
        Q0, Q1, Q2 = self.Q
        s1, s2, s3, s4 = (10 ** (k * c) for k in (1, 2, 3, 4))
        Ey, Ee = [], []
        for i in range(m):
            ez = pk_a.raw_add_plain(E1[i], t[i])
            ez3 = cube_from_powers(pk_a, E1[i], E2[i], E3[i], t[i])
            ey = pk_a.raw_add(pk_a.raw_mul_plain(ez, Q1 * s2), pk_a.raw_mul_plain(ez3, Q2))
            ey = pk_a.raw_add_plain(ey, Q0 * s3)
            Ey.append(ey)
            Ee.append(pk_a.raw_add_plain(ey, -int(y[i]) * s4))
        ybits = self._yhat_bound()
        y2 = sshef_holder(ep, EncryptedMatrix(m, 1, Ey, pk_a, 4 * c), P, self.rng, ybits, 10 ** (3 * c), self.pool, "yhat").ravel()
        if self.diagnostics:
            self.trace.append((self.step, idx, y2.copy()))
        e2 = ring.sub(y2, ring.reduce(y * s1))
        Egb = vec_spmm_encrypted(EncryptedMatrix(1, m, Ee, pk_a, 4 * c), Xb, self.counter)
        gbits = ybits + 1 + Xb.max_abs_bits() + accumulation_bits(Xb, axis=0)
        gb2 = sshef_holder(ep, Egb, P, self.rng, gbits, 10 ** (4 * c), self.pool, "g_b").ravel()
        gga2 = ssmm_dense_side(ep, self.kp, e2.reshape(-1, 1), (1, self.d_a), P, self.rng, self.pool, step="g_a")
        gB = self._trunc(gga2.ravel(), c)
        self.wa2 = self._update(self.wa2, gB, m)
        self.wb2 = self._update(self.wb2, gb2, m)
        self.step += 1


# -- in-process harness ------------------------------------------------------------------


@dataclass
class TrainResult:
    w_a: np.ndarray
    w_b: np.ndarray
    w_a_ring: np.ndarray
    w_b_ring: np.ndarray
    stats_a: object
    stats_b: object
    log: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    batch_losses: list = field(default_factory=list)
    steps: int = 0
    wall_s: float = 0.0


def _run_pair(party_a, party_b):
    errors = {}

    def target(p, name, other):
        try:
            p.run()
        except BaseException as exc:  # surfaced below
            errors[name] = exc
            p.ep.close()

    ta = threading.Thread(target=target, args=(party_a, "A", party_b), name="party-A")
    tb = threading.Thread(target=target, args=(party_b, "B", party_a), name="party-B")
    ta.start()
    tb.start()
    ta.join()
    tb.join()
    for name in ("A", "B"):
        exc = errors.get(name)
        if exc is not None and not isinstance(exc, TransportError):
            raise exc
    if errors:
        raise next(iter(errors.values()))


def make_keys(scheme: Scheme | str = Scheme.OU, key_bits: int = 2048, seed: int | None = None):
    from ..he import keygen

    params = HEParams(scheme, key_bits)
    rng_a = random.Random(f"keys-A:{seed}") if seed is not None else None
    rng_b = random.Random(f"keys-B:{seed}") if seed is not None else None
    return keygen(params, rng_a, "A"), keygen(params, rng_b, "B")


def train_in_process(
    X_a: SparseMatrix,
    X_b: SparseMatrix,
    y,
    cfg: TrainConfig,
    keys=None,
    he: HEParams | None = None,
    rng_seed: int | None = None,
    capture: bool = False,
    diagnostics: bool = True,
    stop_event: threading.Event | None = None,
    checkpoint_dir=None,
    resume_dir=None,
    init=None,
) -> TrainResult:
    """Run both parties as threads over an in-process channel.

    Loss estimates are a simulation diagnostic: the harness sees both
    parties' shares of ``yhat`` and reconstructs them.
    """
    from ..protocols.transport import in_proc_pair

    he = he or HEParams()
    if keys is None:
        keys = make_keys(he.scheme, he.key_bits, rng_seed)
    kp_a, kp_b = keys
    ep_a, ep_b = in_proc_pair(capture=capture)
    log: list = []
    lock = threading.Lock()

    def sink(rec):
        with lock:
            log.append(rec)

    rng_a = random.Random(f"A:{rng_seed}") if rng_seed is not None else None
    rng_b = random.Random(f"B:{rng_seed}") if rng_seed is not None else None
    ck = lambda role, base: (None if base is None else f"{base}/party_{role}.ckpt")
    pa = PartyA(X_a, ep_a, kp_a, cfg, rng_a, stop_event=stop_event, log=sink, checkpoint_path=ck("A", checkpoint_dir),
                resume_from=ck("A", resume_dir), diagnostics=diagnostics,
                init_w=None if init is None else init[0])
    pb = PartyB(X_b, y, ep_b, kp_b, cfg, rng_b, log=sink, checkpoint_path=ck("B", checkpoint_dir),
                resume_from=ck("B", resume_dir), diagnostics=diagnostics,
                init_w=None if init is None else init[1])
    t0 = time.perf_counter()
    _run_pair(pa, pb)
    wall = time.perf_counter() - t0
    ring = cfg.ring
    result = TrainResult(
        w_a=ring.signed(pa.result_weights).astype(np.float64) / 10**cfg.c,
        w_b=ring.signed(pb.result_weights).astype(np.float64) / 10**cfg.c,
        w_a_ring=pa.result_weights,
        w_b_ring=pb.result_weights,
        stats_a=ep_a.stats,
        stats_b=ep_b.stats,
        log=log,
        steps=pa.steps_done,
        wall_s=wall,
    )
    if diagnostics:
        _loss_estimates(result, pa, pb, np.asarray(y), cfg)
    return result


def _loss_estimates(result, pa, pb, y, cfg):
    from .reference import log_loss

    ring = cfg.ring
    per_epoch: dict = {}
    by_step: dict = {}
    n_batches = -(-pa.n // cfg.batch)
    for (step, idx, s1), (_, _, s2) in zip(pa.trace, pb.trace):
        yhat = ring.signed(ring.add(s1, s2)).astype(np.float64) / 10**cfg.c
        loss = log_loss(yhat, y[idx])
        result.batch_losses.append(loss)
        per_epoch.setdefault(step // n_batches, []).append(loss)
        by_step[step] = loss
    for rec in result.log:
        if rec.get("event") == "batch" and rec.get("step") in by_step:
            rec["loss_est"] = by_step[rec["step"]]
    result.losses = [float(np.mean(v)) for _, v in sorted(per_epoch.items())]
