"""Micro-benchmark of the five HE operation types."""

from __future__ import annotations

import random
import statistics
import time

from . import keygen
from .core import HEParams

OPS = ("Enc", "Dec", "OP1", "OP2", "OP3")


def bench_he(params: HEParams, trials: int = 1000, seed: int = 0, plain_bits: int = 64, keypair=None) -> list[dict]:
    """Mean/stddev wall time (microseconds) per op over ``trials`` runs.

    Plaintexts and scalars are uniform ``plain_bits``-bit integers, i.e. ring
    elements as they appear in training.
    """
    if trials < 100:
        raise ValueError("bench_he needs at least 100 trials")
    rng = random.Random(seed)
    kp = keypair or keygen(params, rng)
    pk, sk = kp.pk, kp.sk
    ms = [rng.getrandbits(plain_bits) for _ in range(trials)]
    xs = [rng.getrandbits(plain_bits) for _ in range(trials)]
    rs = [pk.random_r(rng) for _ in range(trials)]
    timings = {op: [] for op in OPS}
    clock = time.perf_counter_ns

    cts = []
    for m, r in zip(ms, rs):
        t0 = clock()
        c = pk.raw_encrypt(m, r)
        timings["Enc"].append(clock() - t0)
        cts.append(c)
    for c in cts:
        t0 = clock()
        sk.raw_decrypt(c)
        timings["Dec"].append(clock() - t0)
    for x, c in zip(xs, cts):
        t0 = clock()
        pk.raw_add_plain(c, x)
        timings["OP1"].append(clock() - t0)
    for c1, c2 in zip(cts, cts[1:] + cts[:1]):
        t0 = clock()
        pk.raw_add(c1, c2)
        timings["OP2"].append(clock() - t0)
    for x, c in zip(xs, cts):
        t0 = clock()
        pk.raw_mul_plain(c, x)
        timings["OP3"].append(clock() - t0)

    rows = []
    for op in OPS:
        us = [t / 1000.0 for t in timings[op]]
        rows.append(
            {
                "scheme": params.scheme.name.lower(),
                "op": op,
                "mean_us": statistics.fmean(us),
                "stddev_us": statistics.pstdev(us),
            }
        )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    lines = ["scheme,op,mean_us,stddev_us"]
    lines += [f"{r['scheme']},{r['op']},{r['mean_us']:.3f},{r['stddev_us']:.3f}" for r in rows]
    return "\n".join(lines) + "\n"
