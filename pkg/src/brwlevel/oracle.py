"""Reference computations at tiny scale.

Everything here trades speed for transparency: exact count laws by dynamic
programming and by exhaustive enumeration, an independent Galton-Watson
recursion, and brute-force grids for I(x) and I(a, x).  Tests compare the
fast code paths against these.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .cgf import classify_cgf
from .errors import NumericalDrift, TooLarge
from .model import CheckedModel, FiniteLattice, OffspringLaw, StepLaw
from .rate import rate_I_vec
from .sim import level_for, threshold_for

N_MAX = 5
MAX_ATOMS = 8
MAX_OFFSPRING = 4
MAX_STATES = 10**8
DRIFT_TOL = 1e-12
KEY_DIGITS = 9


def _key(p: float) -> float:
    return round(p, KEY_DIGITS)


def exact_prob(p: float) -> Fraction:
    """Rational version of a float probability (1/3 stays 1/3)."""
    return Fraction(p).limit_denominator(10**9)


@dataclass
class CountDistribution:
    """Law of Z_n[level, inf): ``pmf[k]`` = P(count = k)."""

    level: float
    n: int
    pmf: np.ndarray

    def tail(self, k: int) -> float:
        """P(count >= k)."""
        k = max(int(k), 0)
        if k >= self.pmf.size:
            return 0 * self.pmf[0]
        return self.pmf[k:].sum()

    @property
    def mean(self):
        return sum(k * p for k, p in enumerate(self.pmf))

    def as_float(self) -> np.ndarray:
        return np.array([float(p) for p in self.pmf])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["count", "probability"])
            for k, p in enumerate(self.pmf):
                w.writerow([k, format(float(p), ".17g")])


def _check_sizes(model: CheckedModel, n: int, n_max: int) -> None:
    if not isinstance(model.step, FiniteLattice):
        raise TypeError("exact computations need a finite lattice step law")
    if model.offspring.is_zeta:
        raise TypeError("exact computations need finite offspring support")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > n_max:
        raise TooLarge(f"n={n} exceeds n_max={n_max}")
    if len(model.step.atoms) > MAX_ATOMS:
        raise TooLarge(f"{len(model.step.atoms)} atoms exceed {MAX_ATOMS}")
    if model.mu > MAX_OFFSPRING:
        raise TooLarge(f"offspring support max {model.mu} exceeds {MAX_OFFSPRING}")
    states = sum(len(model.step.atoms) ** (n - r) * (model.mu**r + 1) for r in range(n + 1))
    if states > MAX_STATES:
        raise TooLarge(f"about {states} DP entries exceed {MAX_STATES}")


def _weights(model: CheckedModel, exact: bool):
    conv = exact_prob if exact else np.longdouble
    atoms = [(x, conv(q)) for x, q in model.step.atoms]
    off = [(k, conv(p)) for k, p in model.offspring.probs if p > 0]
    return atoms, off


def _finish(pmf: np.ndarray, exact: bool) -> np.ndarray:
    total = pmf.sum()
    if exact:
        if total != 1:
            raise NumericalDrift(f"exact pmf sums to {total}")
        return pmf
    drift = abs(float(total) - 1.0)
    if drift > DRIFT_TOL:
        raise NumericalDrift(f"pmf mass drifted by {drift:.3e}")
    return pmf / total


def _padd(acc: np.ndarray, v: np.ndarray) -> np.ndarray:
    if v.size > acc.size:
        acc, v = v.copy(), acc
    else:
        acc = acc.copy()
    acc[: v.size] += v
    return acc


def exact_level_dist(
    model: CheckedModel, n: int, y: float, n_max: int = N_MAX, exact: bool = False
) -> CountDistribution:
    """Exact law of Z_n[y, inf) by backward dynamic programming.

    With r generations left, the count below a particle at p is
    sum_k p_k (C_r(p))^{*k}, where C_r(p) mixes the child laws
    D_{r-1}(p + atom) over the step atoms.  ``exact=True`` runs the whole
    recursion in rationals; otherwise numpy longdouble is used.
    ``y = -inf`` gives the total population.
    """
    _check_sizes(model, n, n_max)
    atoms, off = _weights(model, exact)
    dtype = object if exact else np.longdouble
    zero, one = (Fraction(0), Fraction(1)) if exact else (np.longdouble(0), np.longdouble(1))
    y_key = -math.inf if y == -math.inf else _key(y)
    memo: dict[tuple[int, float], np.ndarray] = {}

    def law(r: int, p: float) -> np.ndarray:
        hit = memo.get((r, p))
        if hit is not None:
            return hit
        if r == 0:
            out = np.array([zero, one] if p >= y_key else [one, zero], dtype=dtype)
        else:
            child = np.array([zero], dtype=dtype)
            for x, q in atoms:
                child = _padd(child, q * law(r - 1, _key(p + x)))
            out = np.array([zero], dtype=dtype)
            power = np.array([one], dtype=dtype)
            k_prev = 0
            for k, pk in off:
                for _ in range(k - k_prev):
                    power = np.convolve(power, child)
                k_prev = k
                out = _padd(out, pk * power)
        memo[(r, p)] = out
        return out

    pmf = _finish(law(n, 0.0), exact)
    return CountDistribution(level=y, n=n, pmf=pmf)


def exact_level_tail(model: CheckedModel, level: float, threshold: int, n: int, exact: bool = False):
    """P(Z_n[level, inf) >= threshold), exactly."""
    return exact_level_dist(model, n, level, exact=exact).tail(threshold)


def exact_upper_dev(model: CheckedModel, a: float, x: float, n: int, exact: bool = False):
    """P(Z_n[xn, inf) >= ceil(e^{an})), exactly."""
    return exact_level_tail(model, level_for(x, n), threshold_for(a, n), n, exact=exact)


@lru_cache(maxsize=8)
def enumerate_configurations(model: CheckedModel, n: int) -> dict[tuple, Fraction]:
    """Exact law of the generation-n position multiset, by brute force.

    Generation by generation, every particle's (offspring count, step
    pattern) outcome is enumerated; configurations are kept as sorted
    position tuples so equal multisets merge.  Rationals throughout.
    """
    _check_sizes(model, n, n_max=N_MAX)
    atoms, off = _weights(model, exact=True)
    outcomes = []
    for k, pk in off:
        for steps in itertools.product(atoms, repeat=k):
            w = pk
            for _, q in steps:
                w *= q
            outcomes.append((tuple(x for x, _ in steps), w))
    configs: dict[tuple, Fraction] = {(0.0,): Fraction(1)}
    for _ in range(n):
        nxt: dict[tuple, Fraction] = {}
        for conf, w in configs.items():
            partial: dict[tuple, Fraction] = {(): w}
            for p in conf:
                grown: dict[tuple, Fraction] = {}
                for pos, pw in partial.items():
                    for steps, q in outcomes:
                        key = tuple(sorted(pos + tuple(_key(p + s) for s in steps)))
                        grown[key] = grown.get(key, 0) + pw * q
                partial = grown
            for key, pw in partial.items():
                nxt[key] = nxt.get(key, 0) + pw
        configs = nxt
    return configs


def enumerate_level_dist(model: CheckedModel, n: int, y: float) -> CountDistribution:
    """Exact law of Z_n[y, inf) read off the enumerated configurations."""
    configs = enumerate_configurations(model, n)
    y_key = -math.inf if y == -math.inf else _key(y)
    pmf = np.array([Fraction(0)] * (model.mu**n + 1), dtype=object)
    for conf, w in configs.items():
        pmf[sum(1 for p in conf if p >= y_key)] += w
    return CountDistribution(level=y, n=n, pmf=_finish(pmf, exact=True))


def gw_population_pmf(offspring: OffspringLaw, n: int, exact: bool = False) -> np.ndarray:
    """Law of |Z_n| by the forward recursion on population sizes alone."""
    conv = exact_prob if exact else np.longdouble
    mu = offspring.max_support
    base = np.array([conv(0)] * (mu + 1), dtype=object if exact else np.longdouble)
    for k, p in offspring.probs:
        base[k] = conv(p)
    dist = np.array([conv(0), conv(1)], dtype=base.dtype)
    for _ in range(n):
        new = np.array([conv(0)], dtype=base.dtype)
        power = np.array([conv(1)], dtype=base.dtype)
        for j in range(dist.size):
            if j:
                power = np.convolve(power, base)
            if dist[j] != 0:
                new = _padd(new, dist[j] * power)
        dist = new
    return dist


# ---------------------------------------------------------------------------
# brute-force grids
# ---------------------------------------------------------------------------


def grid_legendre(step: StepLaw, x: float, lam_hi: float = 10.0, points: int = 100_001) -> float:
    """max over t in linspace(0, lam_hi) of t x - Lambda(t).

    The grid is clipped to the CGF domain (including its edge only when
    Lambda is finite there).  A lower bound on I(x), tight to O(spacing^2)
    when the maximiser lies inside [0, lam_hi].
    """
    ls = classify_cgf(step).lambda_star
    hi = lam_hi
    if math.isfinite(ls) and hi >= ls:
        hi = ls if step.closed_at_star else ls * (1 - 1e-9)
    ts = np.linspace(0.0, hi, points)
    with np.errstate(all="ignore"):
        vals = ts * x - np.asarray(step.cgf(ts), dtype=float)
    vals[0] = 0.0
    return float(np.nanmax(vals))


@dataclass(frozen=True)
class GridInfimum:
    """Outcome of a brute-force scan; ``value`` is inf when nothing is feasible."""

    value: float
    s: float | None
    y: float | None
    feasible_points: int
    s_points: int
    y_points: int

    @property
    def empty(self) -> bool:
        return self.feasible_points == 0


def grid_infimum_Iax(
    model: CheckedModel, a: float, x: float, s_points: int = 2000, y_points: int = 2000, chunk: int = 200
) -> GridInfimum:
    """Brute-force min of s I(y/s) - s log m under the constraint
    log m - I((x - y)/(1 - s)) >= a/(1 - s).

    The grid is s = k/s_points, y = x j/y_points for interior k, j, so
    doubling both resolutions gives a superset and a value that can only
    decrease.
    """
    lm = model.log_m
    s_all = np.arange(1, s_points) / s_points
    ys = x * np.arange(1, y_points) / y_points
    best, best_s, best_y, feasible = math.inf, None, None, 0
    for start in range(0, s_all.size, chunk):
        s = s_all[start : start + chunk, None]
        z = (x - ys[None, :]) / (1.0 - s)
        ok = lm - rate_I_vec(model.step, z.ravel()).reshape(z.shape) >= a / (1.0 - s)
        cnt = int(ok.sum())
        if not cnt:
            continue
        feasible += cnt
        ratio = ys[None, :] / s
        obj = s * rate_I_vec(model.step, ratio.ravel()).reshape(ratio.shape) - s * lm
        obj = np.where(ok, obj, np.inf)
        i = int(np.argmin(obj))
        v = float(obj.flat[i])
        if v < best:
            r, c = divmod(i, ys.size)
            best, best_s, best_y = v, float(s[r, 0]), float(ys[c])
    return GridInfimum(best, best_s, best_y, feasible, s_points, y_points)
