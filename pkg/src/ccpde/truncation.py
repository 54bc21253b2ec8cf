"""Scalar truncation machinery.

The energy of the two-power problem is bounded below by a one-variable curve

    h(x) = alpha1 x^p - (lambda/q) c_q^q x^q - (1/s) c_s^s x^s,   x >= 0,

built from the coercivity constant and the embedding constants.  For small
lambda the curve has a positive hump between two zeros r0 < r1; damping the
superlinear term with a smooth cutoff supported below r1 produces a truncated
energy that is bounded from below and coincides with the original one inside
the r0 ball.  This module computes the curve landmarks, the parameter
threshold at which the hump disappears, and the cutoff itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

__all__ = [
    "HCurveConstants",
    "HAnalysis",
    "TruncationProfile",
    "h_eval",
    "h_prime_eval",
    "h_bar_eval",
    "analyze_h",
    "lambda1",
    "tau_eval",
    "tau_prime_eval",
]


@dataclass(frozen=True)
class HCurveConstants:
    """Coefficients of the lower-bound curve; ``lam`` may stay unset when only
    the threshold is of interest."""

    alpha1: float
    c_q: float
    c_s: float
    lam: float | None
    p: float
    q: float
    s: float

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.c_q > 0 and self.c_s > 0):
            raise ValueError("alpha1, c_q, c_s must be positive")
        if not (1.0 < self.q < self.p < self.s):
            raise ValueError(
                f"exponent ordering violated: require 1 < q < p < s "
                f"(q={self.q}, p={self.p}, s={self.s})"
            )
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    def require_lambda(self) -> float:
        if self.lam is None:
            raise ValueError("lambda is unset on these curve constants")
        return self.lam


@dataclass(frozen=True)
class HAnalysis:
    """Landmarks of the curve: argmax/max and, when the hump is positive, its
    bracketing zeros 0 < r0 < x_max < r1."""

    x_max: float
    h_max: float
    r0: float | None
    r1: float | None

    @property
    def has_hump(self) -> bool:
        return self.r0 is not None


def h_eval(c: HCurveConstants, x):
    """Curve value, vectorized over x >= 0."""
    lam = c.require_lambda()
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return (c.alpha1 * x**c.p
                - lam / c.q * c.c_q**c.q * x**c.q
                - c.c_s**c.s / c.s * x**c.s)


def h_prime_eval(c: HCurveConstants, x):
    """Derivative of the curve (used to polish its zeros)."""
    lam = c.require_lambda()
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        return (c.alpha1 * c.p * x ** (c.p - 1.0)
                - lam * c.c_q**c.q * x ** (c.q - 1.0)
                - c.c_s**c.s * x ** (c.s - 1.0))


def _x_upper(c: HCurveConstants) -> float:
    # beyond this point the superlinear term alone outweighs the p-term,
    # so h < 0 there regardless of lambda
    return (c.s * c.alpha1 / c.c_s**c.s) ** (1.0 / (c.s - c.p))


def _maximize(c: HCurveConstants, n_grid: int = 4096):
    hi = _x_upper(c)
    grid = np.geomspace(hi * 1e-9, hi, n_grid)
    values = h_eval(c, grid)
    i = int(np.argmax(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]
    res = minimize_scalar(lambda x: -h_eval(c, x), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-13 * hi})
    x_max, h_max = float(res.x), float(-res.fun)
    if values[i] > h_max:
        x_max, h_max = float(grid[i]), float(values[i])
    return x_max, h_max, grid, values


def _newton_polish_root(c: HCurveConstants, x: float) -> float:
    for _ in range(4):
        hv = float(h_eval(c, x))
        dv = float(h_prime_eval(c, x))
        if dv == 0.0 or not np.isfinite(dv):
            break
        step = hv / dv
        if not np.isfinite(step) or abs(step) > 0.5 * x:
            break
        x -= step
    return x


def analyze_h(c: HCurveConstants, *, root_tol: float = 1e-12) -> HAnalysis:
    """Locate the maximum and, if positive, the zeros of the curve.

    Maximum by bounded scalar search seeded from a dense log-spaced scan;
    zeros by bracketed root finding refined with Newton steps on the
    analytic derivative.
    """
    x_max, h_max, grid, values = _maximize(c)
    if h_max <= 0.0:
        return HAnalysis(x_max=x_max, h_max=h_max, r0=None, r1=None)

    # left bracket: the curve is negative for small x (the q-term dominates)
    neg_left = np.flatnonzero((grid < x_max) & (values < 0.0))
    lo = float(grid[neg_left[-1]]) if neg_left.size else grid[0]
    guard = 0
    while h_eval(c, lo) >= 0.0 and lo > 1e-280:
        lo *= 1e-2
        guard += 1
        if guard > 200:
            raise RuntimeError("no negative left bracket for the curve zero")
    hi = _x_upper(c)  # h(hi) = -(lam/q) c_q^q hi^q < 0 by construction

    xtol = max(root_tol * max(1.0, x_max), 5e-16 * x_max)
    r0 = brentq(lambda x: float(h_eval(c, x)), lo, x_max, xtol=xtol,
                rtol=4.0 * np.finfo(float).eps)
    r1 = brentq(lambda x: float(h_eval(c, x)), x_max, hi, xtol=xtol,
                rtol=4.0 * np.finfo(float).eps)
    r0 = _newton_polish_root(c, r0)
    r1 = _newton_polish_root(c, r1)
    return HAnalysis(x_max=x_max, h_max=h_max, r0=float(r0), r1=float(r1))


def lambda1(c: HCurveConstants, *, rtol: float = 1e-10) -> float:
    """Parameter threshold: the unique value at which max h drops to zero.

    The maximum decreases strictly in the parameter, is positive as it tends
    to zero (p < s) and negative for large values, so bisection-type root
    finding on the maximum is well posed.  ``c.lam`` is ignored.
    """
    def h_max_at(lam: float) -> float:
        trial = HCurveConstants(alpha1=c.alpha1, c_q=c.c_q, c_s=c.c_s,
                                lam=lam, p=c.p, q=c.q, s=c.s)
        return _maximize(trial)[1]

    # scale-aware initial guess: the parameter balancing the p- and q-terms
    # at the natural x scale of the curve
    x_ref = _x_upper(c)
    guess = c.q * c.alpha1 * x_ref ** (c.p - c.q) / c.c_q**c.q
    lo, hi = guess, guess
    for _ in range(200):
        if h_max_at(lo) > 0.0:
            break
        lo *= 0.5
    else:
        raise RuntimeError("failed to bracket the threshold from below")
    for _ in range(200):
        if h_max_at(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the threshold from above")
    return float(brentq(h_max_at, lo, hi, xtol=1e-300 + 1e-14 * lo,
                        rtol=max(4.0 * np.finfo(float).eps, min(rtol, 1e-12))))


@dataclass(frozen=True)
class TruncationProfile:
    """Radii of the smooth cutoff: identically one below r0, zero above r1."""

    r0: float
    r1: float

    def __post_init__(self):
        if not (0.0 < self.r0 < self.r1):
            raise ValueError(f"require 0 < r0 < r1, got ({self.r0}, {self.r1})")


def _bump(t):
    """exp(-1/t) continued by zero, the standard smooth partition kernel."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    pos = t > 0.0
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out[pos] = np.exp(-1.0 / t[pos])
    return out


def _bump_prime(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    pos = t > 0.0
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out[pos] = np.exp(-1.0 / t[pos]) / (t[pos] * t[pos])
    return out


def tau_eval(tp: TruncationProfile, x):
    """Cutoff value in [0, 1]: nonincreasing, smooth, 1 on [0, r0], 0 on [r1, inf)."""
    x = np.asarray(x, dtype=float)
    up = _bump(tp.r1 - x)
    down = _bump(x - tp.r0)
    denom = up + down
    # both kernels can underflow for extremely thin transition bands; fall
    # back to the nearest plateau there
    with np.errstate(invalid="ignore"):
        val = np.where(denom > 0.0, up / np.where(denom > 0.0, denom, 1.0),
                       np.where(tp.r1 - x >= x - tp.r0, 1.0, 0.0))
    if np.isscalar(x) or x.ndim == 0:
        return float(val)
    return val


def tau_prime_eval(tp: TruncationProfile, x):
    """Analytic derivative of the cutoff (zero outside the transition band)."""
    x = np.asarray(x, dtype=float)
    up = _bump(tp.r1 - x)
    down = _bump(x - tp.r0)
    dup = _bump_prime(tp.r1 - x)
    ddown = _bump_prime(x - tp.r0)
    denom = (up + down) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(denom > 0.0,
                       -(dup * down + up * ddown) / np.where(denom > 0.0, denom, 1.0),
                       0.0)
    if np.isscalar(x) or x.ndim == 0:
        return float(val)
    return val


def h_bar_eval(c: HCurveConstants, tp: TruncationProfile, x):
    """Truncated curve: the superlinear term damped by the cutoff.

    Coincides with h below r0, stays nonnegative beyond r0, and reduces to
    the p/q part above r1.
    """
    lam = c.require_lambda()
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return (c.alpha1 * x**c.p
                - lam / c.q * c.c_q**c.q * x**c.q
                - c.c_s**c.s / c.s * x**c.s * tau_eval(tp, x))
