"""Odd cubic approximations of the logistic function.

``sigmoid(z) - 1/2`` is odd, so the best approximation from
``{1, z, z^3}`` on a symmetric interval has ``q0 = 1/2`` and the remaining
pair is the minimax fit from ``{z, z^3}`` on ``(0, a]``.  That reduced
problem is solved by the Remez exchange with three reference points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar


class ConvergenceError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass(frozen=True)
class SigmoidApprox:
    q0: float
    q1: float
    q2: float
    interval: float = 8.0
    max_error: float = float("nan")
    levels: tuple = field(default=(), compare=False)
    method: str = "minimax"

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        return self.q0 + self.q1 * z + self.q2 * z**3

    def grid_error(self, points: int = 20001) -> float:
        z = np.linspace(-self.interval, self.interval, points)
        return float(np.max(np.abs(sigmoid(z) - self(z))))


def taylor3(interval: float = 8.0) -> SigmoidApprox:
    """Third-order Maclaurin polynomial 1/2 + z/4 - z^3/48."""
    approx = SigmoidApprox(0.5, 0.25, -1.0 / 48.0, interval, method="taylor")
    return SigmoidApprox(0.5, 0.25, -1.0 / 48.0, interval, approx.grid_error(), method="taylor")


def _odd_part(z):
    return sigmoid(z) - 0.5


def _solve_reference(x):
    # q1 x_i + q2 x_i^3 + (-1)^i E = f(x_i)
    A = np.column_stack([x, x**3, (-1.0) ** np.arange(len(x))])
    q1, q2, E = np.linalg.solve(A, _odd_part(x))
    return q1, q2, E


def _refine(err, lo, hi, sign):
    res = minimize_scalar(lambda t: -sign * err(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    return float(res.x)


def minimax_coeffs(interval: float = 8.0, max_iter: int = 100, tol: float = 1e-12, grid: int = 20001) -> SigmoidApprox:
    """Minimax ``q0 + q1 z + q2 z^3`` for the sigmoid on ``[-interval, interval]``."""
    a = float(interval)
    if not 4.0 <= a <= 16.0:
        raise ValueError("interval half-width must lie in [4, 16]")
    x = a * np.array([0.25, 0.65, 1.0])
    zs = np.linspace(0.0, a, grid)
    history = []
    for it in range(1, max_iter + 1):
        q1, q2, E = _solve_reference(x)

        def err(t, q1=q1, q2=q2):
            return float(_odd_part(t) - q1 * t - q2 * t**3)

        ev = _odd_part(zs) - q1 * zs - q2 * zs**3
        # local extrema of the error on the grid (endpoint a included, 0 excluded: err(0) = 0)
        cand = [i for i in range(1, grid - 1) if abs(ev[i]) >= abs(ev[i - 1]) and abs(ev[i]) >= abs(ev[i + 1])]
        if abs(ev[-1]) >= abs(ev[-2]):
            cand.append(grid - 1)
        pts = []
        for i in cand:
            if i == grid - 1:
                pts.append(a)
            else:
                pts.append(_refine(err, zs[i - 1], zs[i + 1], np.sign(ev[i]) or 1.0))
        pts = np.array(sorted(set(pts)))
        vals = np.array([err(t) for t in pts])
        # merge runs of equal sign, keeping the largest magnitude
        merged_p, merged_v = [], []
        for p, v in zip(pts, vals):
            if merged_v and np.sign(v) == np.sign(merged_v[-1]):
                if abs(v) > abs(merged_v[-1]):
                    merged_p[-1], merged_v[-1] = p, v
            else:
                merged_p.append(p)
                merged_v.append(v)
        if len(merged_p) < 3:
            raise ConvergenceError("error curve lost alternation", {"iteration": it, "reference": x.tolist()})
        # three consecutive alternating extrema containing the global maximum
        k = int(np.argmax(np.abs(merged_v)))
        lo, hi = max(0, k - 2), min(k, len(merged_p) - 3)
        window = max(range(lo, hi + 1), key=lambda s: min(abs(v) for v in merged_v[s : s + 3]))
        x_new = np.array(merged_p[window : window + 3])
        max_err = float(np.max(np.abs(merged_v)))
        history.append((it, abs(E), max_err))
        if max_err - abs(E) <= tol * max(1.0, max_err):
            levels = tuple(float(v) for v in merged_v[window : window + 3])
            return SigmoidApprox(0.5, float(q1), float(q2), a, max_err, levels, "minimax")
        x = x_new
    raise ConvergenceError(
        f"Remez exchange did not converge in {max_iter} iterations",
        {"history": history[-5:], "reference": x.tolist()},
    )
