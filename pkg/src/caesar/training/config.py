from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from ..ring import FixedPointParams, RingParams
from .sigmoid import SigmoidApprox, minimax_coeffs


@functools.lru_cache(maxsize=8)
def default_sigmoid(interval: float = 8.0) -> SigmoidApprox:
    return minimax_coeffs(interval)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    epochs: int = 3
    batch: int = 128
    c: int = 4
    l: int = 64
    sigma: int = 40
    seed: int = 0
    approx: SigmoidApprox | None = None
    interval: float = 8.0
    regularization: float = 0.0
    workers: int = 1
    bandwidth_mbps: float | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.regularization != 0.0:
            raise ValueError("regularization is not supported (hook only, must be 0)")
        FixedPointParams(self.c).check(RingParams(self.l))

    @property
    def ring(self) -> RingParams:
        return RingParams(self.l)

    def sigmoid(self) -> SigmoidApprox:
        return self.approx if self.approx is not None else default_sigmoid(self.interval)


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def batch_schedule(n: int, batch: int, epochs: int, seed: int) -> list[tuple[int, list[np.ndarray]]]:
    """Per epoch, contiguous batches over a seeded permutation of the samples."""
    out = []
    for epoch in range(epochs):
        perm = epoch_order(n, seed, epoch)
        out.append((epoch, [perm[i : i + batch] for i in range(0, n, batch)]))
    return out


def flat_schedule(n: int, batch: int, epochs: int, seed: int) -> list[tuple[int, int, np.ndarray]]:
    return [(e, k, idx) for e, batches in batch_schedule(n, batch, epochs, seed) for k, idx in enumerate(batches)]
