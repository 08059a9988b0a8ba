"""Quadratic pump-curve fitting g(q) = alpha q^2 + beta q + gamma."""
from __future__ import annotations

import math
import warnings
from typing import NamedTuple, Sequence

import numpy as np

PIN = 1e-6


class PumpCurvePoint(NamedTuple):
    q: float
    g: float


class PumpFit(NamedTuple):
    alpha: float
    beta: float
    gamma: float
    rms: float


class PumpFitWarning(UserWarning):
    pass


class PumpFitError(ValueError):
    pass


def _check(points: Sequence[PumpCurvePoint]) -> np.ndarray:
    if len(points) < 3:
        raise PumpFitError(f"need at least 3 curve points, got {len(points)}")
    arr = np.array([(float(p[0]), float(p[1])) for p in points])
    if not np.all(np.isfinite(arr)):
        raise PumpFitError("curve points must be finite")
    if np.any(arr[:, 0] < 0) or np.any(arr[:, 1] < 0):
        raise PumpFitError("curve points must have nonnegative flow and head")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise PumpFitError("curve points must be strictly increasing in flow")
    return arr


def _lstsq(q: np.ndarray, g: np.ndarray, fixed: dict[int, float]) -> np.ndarray:
    design = np.column_stack([q * q, q, np.ones_like(q)])
    free = [i for i in range(3) if i not in fixed]
    rhs = g - sum(design[:, i] * v for i, v in fixed.items())
    sub = design[:, free]
    # scale columns before judging rank so large flows do not hide degeneracy
    norms = np.linalg.norm(sub, axis=0)
    if np.any(norms == 0) or np.linalg.cond(sub / norms) > 1e12:
        raise PumpFitError("curve points are degenerate (singular normal equations)")
    sol, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
    coef = np.zeros(3)
    coef[free] = sol
    for i, v in fixed.items():
        coef[i] = v
    return coef


def fit_pump_curve(points: Sequence[PumpCurvePoint]) -> PumpFit:
    """Least-squares fit; alpha < 0 and gamma > 0 are enforced by pinning.

    A coefficient within PIN of its admissible boundary (or beyond it) is fixed
    at the boundary offset by PIN and the rest refit; a PumpFitWarning says so.
    """
    arr = _check(points)
    q, g = arr[:, 0], arr[:, 1]
    fixed: dict[int, float] = {}
    coef = _lstsq(q, g, fixed)
    for _ in range(2):
        pinned = []
        if 0 not in fixed and coef[0] > -PIN:
            fixed[0] = -PIN
            pinned.append("alpha")
        if 2 not in fixed and coef[2] < PIN:
            fixed[2] = PIN
            pinned.append("gamma")
        if not pinned:
            break
        names = {"alpha": 0, "gamma": 2}
        detail = ", ".join(f"{n}={fixed[names[n]]:g}" for n in pinned)
        warnings.warn(PumpFitWarning(
            f"pump curve fit: {' and '.join(pinned)} pinned at boundary ({detail})"), stacklevel=2)
        coef = _lstsq(q, g, fixed)
    resid = g - (coef[0] * q * q + coef[1] * q + coef[2])
    rms = math.sqrt(float(np.mean(resid * resid)))
    return PumpFit(float(coef[0]), float(coef[1]), float(coef[2]), rms)
