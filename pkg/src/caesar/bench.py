"""Communication and parallelism benchmarks.

Epoch bytes come from real protocol runs over the in-process transport.
Virtual time converts those bytes (including frame headers) to seconds at
a configured link rate; compute time is wall clock and reported separately.
"""

from __future__ import annotations

import random
import time

import numpy as np

from .data import synthetic
from .he import HEParams, WorkerPool, keygen
from .protocols.transport import virtual_seconds
from .training.caesar import train_in_process
from .training.config import TrainConfig
from .training.secureml import secureml_baseline_train

COMM_FIELDS = ["protocol", "n", "d", "batch", "bandwidth_mbps", "epoch_bytes", "virtual_epoch_s", "compute_s"]


def _dataset(n, d, density, seed):
    X, y, _ = synthetic(n, d, density, seed)
    d_a = d // 2
    return X.take_cols(0, d_a), X.take_cols(d_a, d), y


def epoch_bytes(stats_a, stats_b, epoch: int = 0, frames: bool = True) -> int:
    return stats_a.total_bytes(frames, epoch) + stats_b.total_bytes(frames, epoch)


def caesar_epoch(n, d, batch, keys, density=0.1, seed=0, workers=1):
    X_a, X_b, y = _dataset(n, d, density, seed)
    cfg = TrainConfig(epochs=1, batch=batch, seed=seed, workers=workers)
    t0 = time.perf_counter()
    res = train_in_process(X_a, X_b, y, cfg, keys=keys, rng_seed=seed, diagnostics=False)
    return res, time.perf_counter() - t0


def baseline_epoch(n, d, batch, density=0.1, seed=0):
    X_a, X_b, y = _dataset(n, d, density, seed)
    cfg = TrainConfig(epochs=1, batch=batch, seed=seed)
    t0 = time.perf_counter()
    res = secureml_baseline_train(X_a, X_b, y, cfg, rng_seed=seed)
    return res, time.perf_counter() - t0


def bench_comm(
    n: int = 4096,
    dims=(100, 200, 400),
    batches=(1024, 4096),
    bandwidths=(10, 20, 30, 40),
    key_bits: int = 1024,
    scheme: str = "OU",
    density: float = 0.1,
    seed: int = 0,
    workers: int = 1,
    baseline: bool = False,
) -> list[dict]:
    """One training epoch per ``(batch, d)``; one row per bandwidth."""
    params = HEParams(scheme, key_bits)
    keys = (keygen(params, random.Random(f"bench-A:{seed}"), "A"), keygen(params, random.Random(f"bench-B:{seed}"), "B"))
    rows = []
    for batch in batches:
        for d in dims:
            runs = [("caesar",) + caesar_epoch(n, d, batch, keys, density, seed, workers)]
            if baseline:
                runs.append(("secureml",) + baseline_epoch(n, d, batch, density, seed))
            for proto, res, wall in runs:
                nbytes = epoch_bytes(res.stats_a, res.stats_b)
                for bw in bandwidths:
                    rows.append({
                        "protocol": proto,
                        "n": n,
                        "d": d,
                        "batch": batch,
                        "bandwidth_mbps": bw,
                        "epoch_bytes": nbytes,
                        "virtual_epoch_s": virtual_seconds(nbytes, bw),
                        "compute_s": wall,
                    })
    return rows


def bench_workers(count: int = 1000, workers=(1, 8), key_bits: int = 1024, seed: int = 0, repeats: int = 1) -> list[dict]:
    """Wall time to encrypt ``count`` values with pools of several sizes."""
    params = HEParams("OU", key_bits)
    kp = keygen(params, random.Random(f"workers:{seed}"), "A")
    rng = random.Random(seed)
    ms = [rng.getrandbits(64) for _ in range(count)]
    rows = []
    for w in workers:
        with WorkerPool(w) as pool:
            pool.encrypt(kp.pk, ms[: max(1, w)], random.Random(1))  # start the workers
            best = float("inf")
            for _ in range(repeats):
                t0 = time.perf_counter()
                pool.encrypt(kp.pk, ms, random.Random(2))
                best = min(best, time.perf_counter() - t0)
        rows.append({"workers": w, "count": count, "wall_s": best})
    return rows


def linear_fit(features: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, float]:
    """Least squares with intercept; returns ``(coefficients, R^2)``."""
    A = np.column_stack([np.asarray(features, dtype=np.float64), np.ones(len(target))])
    t = np.asarray(target, dtype=np.float64)
    coef, *_ = np.linalg.lstsq(A, t, rcond=None)
    resid = t - A @ coef
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return coef, r2


def rows_to_csv(rows: list[dict], fields=None) -> str:
    import csv
    import io

    fields = fields or list(rows[0].keys())
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
