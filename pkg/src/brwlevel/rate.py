"""Rate function I(x), its inverse, the speed x* and the a.s. growth exponent.

Infinite values are plain IEEE ``math.inf``, never a large sentinel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .cgf import CgfProfile, classify_cgf
from .errors import BoundaryPoint
from .model import CheckedModel, StepLaw

T_TOL = 1e-12
XSTAR_ITERS = 200


def newton_bracketed(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    lo: float,
    hi: float,
    x0: float | None = None,
    tol: float = T_TOL,
    maxiter: int = 200,
) -> float:
    """Root of an increasing ``f`` on [lo, hi]; Newton with bisection fallback."""
    t = 0.5 * (lo + hi) if x0 is None or not lo < x0 < hi else x0
    for _ in range(maxiter):
        ft = f(t)
        if ft == 0:
            return t
        if ft > 0:
            hi = t
        else:
            lo = t
        d = fprime(t)
        step_ok = False
        if d > 0 and math.isfinite(d):
            t_new = t - ft / d
            step_ok = lo < t_new < hi
        if not step_ok:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= tol * max(1.0, abs(t_new)) or hi - lo <= tol * max(1.0, abs(hi)):
            return t_new
        t = t_new
    return t


def _upper_bracket(step: StepLaw, prof: CgfProfile, g: Callable[[float], float], target: float) -> float:
    """A point hi in the domain with g(hi) > target (g increasing in lambda)."""
    if math.isfinite(prof.lambda_star):
        ls = prof.lambda_star
        if step.closed_at_star:
            return ls
        k = 1
        while g(ls * (1 - 2.0**-k)) <= target and k < 52:
            k += 1
        return ls * (1 - 2.0**-k)
    hi = 1.0
    while g(hi) <= target:
        hi *= 2.0
        if hi > 1e300:
            raise OverflowError("no upper bracket")
    return hi


def tilt_for_slope(step: StepLaw, x: float) -> float:
    """The t in [0, lambda*) solving Lambda'(t) = x, for 0 < x < sup Lambda'."""
    prof = classify_cgf(step)
    g = lambda t: float(step.cgf_prime(t))
    hi = _upper_bracket(step, prof, g, x)
    var0 = float(step.cgf_second(0.0))
    x0 = x / var0 if var0 > 0 else None
    return newton_bracketed(lambda t: g(t) - x, lambda t: float(step.cgf_second(t)), 0.0, hi, x0)


def rate_I(step: StepLaw, x: float) -> float:
    """I(x) = sup_{t >= 0} {t x - Lambda(t)}, with values in [0, inf]."""
    if x <= 0:
        return 0.0
    prof = classify_cgf(step)
    if prof.case == "II":
        L = prof.L
        if x > L:
            return math.inf
        if x == L:
            p = prof.mass_at_L
            return -math.log(p) if p and p > 0 else math.inf
    elif prof.case == "III" and x >= prof.T:
        ls = prof.lambda_star
        return ls * x - float(step.cgf(ls))
    t = tilt_for_slope(step, x)
    return max(t * x - float(step.cgf(t)), 0.0)


def rate_I_prime(step: StepLaw, x: float) -> float:
    """I'(x), which equals the optimal tilt."""
    if x <= 0:
        return 0.0
    prof = classify_cgf(step)
    if prof.case == "III" and x >= prof.T:
        return prof.lambda_star
    if prof.case == "II" and x >= prof.L:
        return math.inf
    return tilt_for_slope(step, x)


def rate_I_vec(step: StepLaw, xs, table_points: int = 200_001) -> np.ndarray:
    """I on an array of points.

    Gaussian steps use the closed form.  Other laws interpolate the exact
    parametric curve t -> (Lambda'(t), t Lambda'(t) - Lambda(t)) on a dense
    tilt grid; accuracy is O(grid^2), fine for brute-force scans.
    """
    xs = np.asarray(xs, dtype=float)
    from .model import Normal

    if isinstance(step, Normal):
        return np.where(xs > 0, 0.5 * (np.maximum(xs, 0) / step.sigma) ** 2, 0.0)
    finite = xs[np.isfinite(xs)]
    x_hi = float(finite.max()) if finite.size else 0.0
    prof = classify_cgf(step)
    out = np.zeros_like(xs)
    pos = xs > 0
    if not pos.any():
        return out
    if prof.case == "II":
        x_cap = min(x_hi, prof.L * (1 - 1e-9))
    elif prof.case == "III":
        x_cap = min(x_hi, prof.T)
    else:
        x_cap = x_hi
    t_hi = tilt_for_slope(step, x_cap) if x_cap > 0 else 0.0
    ts = np.linspace(0.0, t_hi, table_points) if t_hi > 0 else np.zeros(2)
    with np.errstate(all="ignore"):
        sl = np.asarray(step.cgf_prime(ts), dtype=float)
        iv = ts * sl - np.asarray(step.cgf(ts), dtype=float)
    out[pos] = np.interp(xs[pos], sl, iv)
    if prof.case == "II":
        out[xs > prof.L] = math.inf
        at_L = np.isclose(xs, prof.L, rtol=0, atol=1e-15)
        out[at_L] = -math.log(prof.mass_at_L) if prof.mass_at_L else math.inf
        near = (xs > x_cap) & (xs < prof.L) & ~at_L
        out[near] = [rate_I(step, float(v)) for v in xs[near]]
    elif prof.case == "III":
        big = xs >= prof.T
        ls = prof.lambda_star
        out[big] = ls * xs[big] - float(step.cgf(ls))
    return out


def rate_inverse(step: StepLaw, v: float) -> float:
    """Smallest xbar >= 0 with I(xbar) = v, for v >= 0.

    Solves t Lambda'(t) - Lambda(t) = v in the tilt t (increasing, with
    derivative t Lambda''(t)) and returns Lambda'(t).  Returns the essential
    supremum L when v reaches I(L) in case II.
    """
    if v < 0:
        raise ValueError("v must be nonnegative")
    if v == 0:
        return 0.0
    prof = classify_cgf(step)
    if prof.case == "II":
        p = prof.mass_at_L
        i_L = -math.log(p) if p and p > 0 else math.inf
        if v >= i_L:
            return prof.L
    elif prof.case == "III":
        ls = prof.lambda_star
        lam_star_val = float(step.cgf(ls))
        i_T = ls * prof.T - lam_star_val
        if v >= i_T:
            return (v + lam_star_val) / ls

    def h(t):
        return t * float(step.cgf_prime(t)) - float(step.cgf(t))

    hi = _upper_bracket(step, prof, h, v)
    var0 = float(step.cgf_second(0.0))
    x0 = math.sqrt(2 * v / var0) if var0 > 0 else None
    t = newton_bracketed(
        lambda t: h(t) - v, lambda t: t * float(step.cgf_second(t)), 0.0, hi, x0, tol=1e-14
    )
    return float(step.cgf_prime(t))


@dataclass(frozen=True)
class RateProfile:
    cgf_profile: CgfProfile
    x_star: float
    kappa: float
    I_at_L: float | None = None

    def to_dict(self) -> dict:
        return {
            **self.cgf_profile.to_dict(),
            "x_star": self.x_star,
            "kappa": self.kappa,
            "I_at_L": self.I_at_L,
        }


@lru_cache(maxsize=None)
def speed_xstar(model: CheckedModel) -> float:
    """x* = sup{y >= 0 : I(y) <= log m}, by bisection."""
    step = model.step
    log_m = model.log_m
    prof = classify_cgf(step)
    if prof.case == "II":
        if rate_I(step, prof.L) <= log_m + 1e-12:
            return prof.L
        hi = prof.L
    else:
        hi = 1.0
        while rate_I(step, hi) <= log_m:
            hi *= 2.0
    lo = 0.0
    for _ in range(XSTAR_ITERS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if rate_I(step, mid) <= log_m:
            lo = mid
        else:
            hi = mid
    return lo


@lru_cache(maxsize=None)
def rate_profile(model: CheckedModel) -> RateProfile:
    prof = classify_cgf(model.step)
    kappa = math.inf if prof.case == "II" else prof.lambda_star
    i_L = None
    if prof.case == "II":
        p = prof.mass_at_L
        i_L = -math.log(p) if p and p > 0 else math.inf
    return RateProfile(cgf_profile=prof, x_star=speed_xstar(model), kappa=kappa, I_at_L=i_L)


def biggins_growth(model: CheckedModel, x: float) -> float:
    """Almost-sure limit of (1/n) log Z_n[xn, inf)."""
    if x <= 0:
        return model.log_m
    xs = speed_xstar(model)
    if x == xs:
        raise BoundaryPoint(f"x = x* = {xs!r}: no limit value is available")
    if x > xs:
        return 0.0
    return model.log_m - rate_I(model.step, x)
