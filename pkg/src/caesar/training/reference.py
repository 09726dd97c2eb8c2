"""Plaintext logistic regression with the same polynomial sigmoid.

``mode="fixed"`` reproduces the secure pipeline's fixed-point arithmetic with
exact integer floors (same scale schedule, same batch order); the secure
result must match it up to the +-1 unit truncation noise.  ``mode="real"``
uses float arithmetic throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

import numpy as np

from ..ring import RingParams, scaled_floor
from ..sparse import SparseMatrix
from .config import TrainConfig, batch_schedule


def fixed_coeffs(approx, c: int) -> tuple[int, int, int]:
    """Polynomial coefficients at scale c."""
    return tuple(scaled_floor(q, c) for q in (approx.q0, approx.q1, approx.q2))


def alpha_fixed(alpha: float, batch_len: int, c: int) -> int:
    """``alpha / |B|`` at scale 2c."""
    return math.floor(Fraction(Decimal(repr(float(alpha)))) / batch_len * 10 ** (2 * c))


def _floordiv(a: np.ndarray, d: int) -> np.ndarray:
    return np.array([int(v) // d for v in np.ravel(a)], dtype=object).reshape(np.shape(a))


def _int_dense(X: SparseMatrix, c: int) -> np.ndarray:
    enc = X.encode(c, RingParams(64))
    return np.asarray(enc.ring.signed(enc.to_dense()), dtype=object)


@dataclass
class ReferenceResult:
    w_a: np.ndarray
    w_b: np.ndarray
    losses: list
    w_a_int: np.ndarray | None = None
    w_b_int: np.ndarray | None = None
    # per batch: predictions and (g_a, g_b) gradient sums, as reals
    yhat: list = field(default_factory=list)
    grads: list = field(default_factory=list)


def log_loss(p: np.ndarray, y: np.ndarray, eps: float = 1e-6) -> float:
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def plaintext_reference_train(X_a: SparseMatrix, X_b: SparseMatrix, y, cfg: TrainConfig, mode: str = "fixed", init=None) -> ReferenceResult:
    y = np.asarray(y)
    n = X_a.rows
    if X_b.rows != n or y.shape[0] != n:
        raise ValueError("parties must hold the same samples")
    approx = cfg.sigmoid()
    schedule = batch_schedule(n, cfg.batch, cfg.epochs, cfg.seed)
    losses = []
    if mode == "real":
        Xa = X_a.to_dense().astype(np.float64)
        Xb = X_b.to_dense().astype(np.float64)
        yhats, grads = [], []
        wa, wb = (np.zeros(X_a.cols), np.zeros(X_b.cols)) if init is None else (np.asarray(init[0], float), np.asarray(init[1], float))
        for epoch, batches in schedule:
            for idx in batches:
                z = Xa[idx] @ wa + Xb[idx] @ wb
                yh = approx(z)
                e = yh - y[idx]
                yhats.append(yh)
                grads.append((e @ Xa[idx], e @ Xb[idx]))
                wa = wa - cfg.alpha / len(idx) * (e @ Xa[idx])
                wb = wb - cfg.alpha / len(idx) * (e @ Xb[idx])
            losses.append(log_loss(approx(Xa @ wa + Xb @ wb), y))
        return ReferenceResult(wa, wb, losses, yhat=yhats, grads=grads)
    if mode != "fixed":
        raise ValueError("mode must be 'fixed' or 'real'")
    c = cfg.c
    s1, s2, s3, s4 = (10 ** (k * c) for k in (1, 2, 3, 4))
    Q0, Q1, Q2 = fixed_coeffs(approx, c)
    Xa, Xb = _int_dense(X_a, c), _int_dense(X_b, c)
    yi = np.array([int(v) for v in y], dtype=object)
    yhats, grads = [], []
    if init is None:
        wa, wb = np.zeros(X_a.cols, dtype=object), np.zeros(X_b.cols, dtype=object)
    else:
        wa, wb = (np.array([scaled_floor(v, c) for v in np.ravel(w)], dtype=object) for w in init)
    for epoch, batches in schedule:
        for idx in batches:
            xa, xb = Xa[idx], Xb[idx]
            z = _floordiv(xa.dot(wa) + xb.dot(wb), s1)
            y4 = Q0 * s3 + Q1 * s2 * z + Q2 * z**3
            yc = _floordiv(y4, s3)
            ec = yc - yi[idx] * s1
            e4 = y4 - yi[idx] * s4
            ga = _floordiv(ec.dot(xa), s1)
            gb = _floordiv(e4.dot(xb), s4)
            yhats.append(yc.astype(np.float64) / s1)
            grads.append((ga.astype(np.float64) / s1, gb.astype(np.float64) / s1))
            a_eff = alpha_fixed(cfg.alpha, len(idx), c)
            wa = wa - _floordiv(a_eff * ga, s2)
            wb = wb - _floordiv(a_eff * gb, s2)
        zf = (Xa.dot(wa) + Xb.dot(wb)).astype(np.float64) / (s1 * s1)
        losses.append(log_loss(approx(zf), y))
    return ReferenceResult(wa.astype(np.float64) / s1, wb.astype(np.float64) / s1, losses, wa, wb, yhats, grads)
