"""Offspring laws, step laws and model validation.

A branching random walk is fixed by an offspring law on the positive
integers and a centred step law.  Step laws carry their own analytic
cumulant generating function, survival function and samplers; the rest
of the package only talks to them through that surface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats
from scipy.optimize import brentq

from .errors import AssumptionViolated

PROB_TOL = 1e-12
MEAN_TOL = 1e-10
K_MAX = 10**9  # sampling cap for zeta-tailed offspring laws
# below this acceptance rate conditioned sampling switches to inverse transform
MIN_ACCEPTANCE = 1e-3


# ---------------------------------------------------------------------------
# offspring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring distribution {p_k}.

    Finite-support laws are given by ``probs``.  A zeta-tailed law
    (``p_k`` proportional to ``k**-(beta+1)`` for k >= 1) is built with
    :meth:`zeta`; it has unbounded support and ``P(Z > y) ~ y**-beta``.
    """

    probs: tuple[tuple[int, float], ...] = ()
    zeta_beta: float | None = None

    @classmethod
    def finite(cls, probs: Mapping[int, float]) -> "OffspringLaw":
        items = tuple(sorted((int(k), float(p)) for k, p in probs.items()))
        return cls(probs=items)

    @classmethod
    def zeta(cls, beta: float) -> "OffspringLaw":
        return cls(probs=(), zeta_beta=float(beta))

    @property
    def is_zeta(self) -> bool:
        return self.zeta_beta is not None

    def pmf(self, k: int) -> float:
        if self.is_zeta:
            if k < 1:
                return 0.0
            s = self.zeta_beta + 1.0
            return float(k ** (-s) / special.zeta(s))
        return dict(self.probs).get(int(k), 0.0)

    @cached_property
    def support(self) -> tuple[int, ...]:
        if self.is_zeta:
            raise ValueError("zeta law has unbounded support")
        return tuple(k for k, p in self.probs if p > 0)

    @cached_property
    def mean(self) -> float:
        if self.is_zeta:
            beta = self.zeta_beta
            if beta <= 1:
                return math.inf
            return float(special.zeta(beta) / special.zeta(beta + 1.0))
        return math.fsum(k * p for k, p in self.probs)

    @property
    def max_support(self) -> float:
        """mu = sup{k : p_k > 0}; infinite for zeta tails."""
        if self.is_zeta:
            return math.inf
        return max(self.support)

    @property
    def b(self) -> int:
        """Smallest support point k with k >= m."""
        m = self.mean
        if self.is_zeta:
            return math.ceil(m)
        return min(k for k in self.support if k >= m)

    def alpha(self, a: float) -> float:
        return offspring_alpha(self, a)

    @cached_property
    def truncation_mass(self) -> float:
        """P(Z > K_MAX); zero for finite support."""
        if not self.is_zeta:
            return 0.0
        s = self.zeta_beta + 1.0
        return float(special.zeta(s, K_MAX + 1) / special.zeta(s))

    def tail(self, y: float) -> float:
        """P(Z > y)."""
        if self.is_zeta:
            s = self.zeta_beta + 1.0
            q = max(math.floor(y), 0) + 1
            return float(special.zeta(s, q) / special.zeta(s))
        return math.fsum(p for k, p in self.probs if k > y)

    @cached_property
    def tail_constants(self) -> tuple[float, float]:
        """(c1, c2) with c1 y^-beta <= P(Z > y) <= c2 y^-beta for y >= 1.

        On [k, k+1) the tail is constant, so y^beta P(Z > y) ranges over
        [k^beta T_k, (k+1)^beta T_k]; scanning k and adding the limit
        1 / (beta zeta(beta+1)) gives the envelope.
        """
        if not self.is_zeta:
            raise ValueError("tail constants are defined for zeta laws only")
        beta = self.zeta_beta
        s = beta + 1.0
        k = np.arange(1, 20001, dtype=float)
        t = special.zeta(s, k + 1) / special.zeta(s)
        limit = 1.0 / (beta * special.zeta(s))
        lo = min(float(np.min(k**beta * t)), limit)
        hi = max(float(np.max((k + 1) ** beta * t)), limit)
        return lo, hi

    @cached_property
    def _table(self) -> tuple[np.ndarray, np.ndarray]:
        ks = np.array([k for k, p in self.probs if p > 0], dtype=np.int64)
        ps = np.array([p for k, p in self.probs if p > 0])
        return ks, np.cumsum(ps) / ps.sum()

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Offspring counts; zeta draws above K_MAX come back as K_MAX + 1."""
        if self.is_zeta:
            draws = rng.zipf(self.zeta_beta + 1.0, size=size)
            return np.minimum(draws, K_MAX + 1)
        ks, cdf = self._table
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return ks[np.minimum(idx, len(ks) - 1)]

    def to_dict(self) -> dict:
        if self.is_zeta:
            return {"zeta_beta": self.zeta_beta}
        return {"probs": {str(k): p for k, p in self.probs}}


def offspring_alpha(offspring: OffspringLaw, a: float) -> float:
    """Smallest support point k with k >= e^a, or inf if there is none."""
    if a < 0:
        raise ValueError("a must be nonnegative")
    target = math.exp(a)
    # e^{log k} can land a hair above k
    target = target * (1 - 1e-12)
    if offspring.is_zeta:
        return math.ceil(target)
    ks = [k for k in offspring.support if k >= target]
    return min(ks) if ks else math.inf


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------


class StepLaw:
    """Interface of a centred step law.

    ``cgf``, ``cgf_prime`` and ``cgf_second`` accept scalars or arrays and do
    no domain checking; :mod:`brwlevel.cgf` wraps them with checks.
    """

    kind: str = "abstract"
    lambda_star: float = math.inf
    # whether Lambda stays finite at lambda_star itself
    closed_at_star: bool = False

    @property
    def ess_sup(self) -> float:
        raise NotImplementedError

    @property
    def mass_at_sup(self) -> float:
        return 0.0

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def prob_zero(self) -> float:
        return 0.0

    def cgf(self, lam):
        raise NotImplementedError

    def cgf_prime(self, lam):
        raise NotImplementedError

    def cgf_second(self, lam):
        raise NotImplementedError

    def sf(self, t: float) -> float:
        """P(X >= t)."""
        raise NotImplementedError

    def isf(self, q):
        """Inverse of ``sf`` for continuous laws."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample_at_least(self, rng: np.random.Generator, size: int, lower: float) -> np.ndarray:
        """Draws from X conditioned on X >= lower."""
        acc = self.sf(lower)
        if acc <= 0:
            raise ValueError(f"P(X >= {lower}) = 0")
        if acc < MIN_ACCEPTANCE:
            u = rng.random(size)
            return np.maximum(self.isf(u * acc), lower)
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            draw = self.sample(rng, int(need / acc * 1.2) + 16)
            draw = draw[draw >= lower][:need]
            out[filled:filled + draw.size] = draw
            filled += draw.size
        return out

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(StepLaw):
    sigma: float = 1.0

    kind = "normal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise AssumptionViolated("P(X=0)<1", "sigma must be positive")

    @property
    def ess_sup(self):
        return math.inf

    @property
    def mean(self):
        return 0.0

    def cgf(self, lam):
        return 0.5 * self.sigma**2 * np.square(lam)

    def cgf_prime(self, lam):
        return self.sigma**2 * lam

    def cgf_second(self, lam):
        return self.sigma**2 + 0.0 * lam

    def sf(self, t):
        return float(stats.norm.sf(t / self.sigma))

    def isf(self, q):
        return self.sigma * stats.norm.isf(q)

    def sample(self, rng, size):
        return rng.normal(0.0, self.sigma, size)

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma}


def _centre_atoms(atoms: Sequence[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    merged: dict[float, float] = {}
    for x, p in atoms:
        merged[float(x)] = merged.get(float(x), 0.0) + float(p)
    total = math.fsum(merged.values())
    if any(p < -PROB_TOL for p in merged.values()) or abs(total - 1.0) > PROB_TOL:
        raise AssumptionViolated("probabilities", f"atom weights must be >= 0 and sum to 1 (sum={total!r})")
    shift = math.fsum(x * p for x, p in merged.items())
    return tuple(sorted((x - shift, p) for x, p in merged.items() if p > 0))


@dataclass(frozen=True, init=False)
class FiniteLattice(StepLaw):
    """Finitely many atoms, recentred to mean zero on construction."""

    atoms: tuple[tuple[float, float], ...]

    kind = "lattice"

    def __init__(self, atoms: Sequence[tuple[float, float]]):
        object.__setattr__(self, "atoms", _centre_atoms(atoms))

    @cached_property
    def _xp(self):
        xs = np.array([x for x, _ in self.atoms])
        ps = np.array([p for _, p in self.atoms])
        return xs, np.log(ps), ps

    @property
    def ess_sup(self):
        return self.atoms[-1][0]

    @property
    def mass_at_sup(self):
        return self.atoms[-1][1]

    @property
    def mean(self):
        return math.fsum(x * p for x, p in self.atoms)

    @property
    def prob_zero(self):
        return sum(p for x, p in self.atoms if abs(x) <= 1e-15)

    @cached_property
    def _atom_lists(self):
        return [x for x, _ in self.atoms], [math.log(p) for _, p in self.atoms]

    def _tilted_scalar(self, lam: float):
        xs, logp = self._atom_lists
        zs = [lp + lam * x for x, lp in zip(xs, logp)]
        top = max(zs)
        ws = [math.exp(z - top) for z in zs]
        tot = math.fsum(ws)
        mu = math.fsum(w * x for w, x in zip(ws, xs)) / tot
        m2 = math.fsum(w * x * x for w, x in zip(ws, xs)) / tot
        return top + math.log(tot), mu, max(m2 - mu * mu, 0.0)

    def _tilted(self, lam):
        xs, logp, _ = self._xp
        lam = np.asarray(lam, dtype=float)
        z = logp + np.multiply.outer(lam, xs)
        lse = special.logsumexp(z, axis=-1)
        w = np.exp(z - lse[..., None])
        return lse, w

    def cgf(self, lam):
        if np.ndim(lam) == 0:
            return self._tilted_scalar(float(lam))[0]
        lse, _ = self._tilted(lam)
        return lse if np.ndim(lse) else float(lse)

    def cgf_prime(self, lam):
        if np.ndim(lam) == 0:
            return self._tilted_scalar(float(lam))[1]
        xs = self._xp[0]
        _, w = self._tilted(lam)
        out = w @ xs
        return out if np.ndim(out) else float(out)

    def cgf_second(self, lam):
        if np.ndim(lam) == 0:
            return self._tilted_scalar(float(lam))[2]
        xs = self._xp[0]
        _, w = self._tilted(lam)
        mu = w @ xs
        out = w @ xs**2 - mu**2
        out = np.maximum(out, 0.0)
        return out if np.ndim(out) else float(out)

    def sf(self, t):
        return math.fsum(p for x, p in self.atoms if x >= t)

    def sample(self, rng, size):
        xs, _, ps = self._xp
        cdf = np.cumsum(ps)
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return xs[np.minimum(idx, len(xs) - 1)]

    def sample_at_least(self, rng, size, lower):
        xs, _, ps = self._xp
        keep = xs >= lower
        if not keep.any():
            raise ValueError(f"P(X >= {lower}) = 0")
        sub, w = xs[keep], np.cumsum(ps[keep])
        idx = np.searchsorted(w, rng.random(size) * w[-1], side="right")
        return sub[np.minimum(idx, len(sub) - 1)]

    def to_dict(self):
        return {"kind": self.kind, "atoms": [[x, p] for x, p in self.atoms]}


@dataclass(frozen=True, init=False)
class TwoPoint(FiniteLattice):
    """Two atoms low < 0 < high; ``q`` is the probability of ``high``."""

    kind = "two_point"

    def __init__(self, low: float, high: float, q: float):
        if not 0 < q < 1:
            raise AssumptionViolated("P(X=0)<1", "two-point law needs 0 < q < 1")
        if not low < high:
            raise ValueError("need low < high")
        super().__init__([(low, 1.0 - q), (high, q)])

    def to_dict(self):
        (lo, p_lo), (hi, p_hi) = self.atoms
        return {"kind": self.kind, "low": lo, "high": hi, "q": p_hi}


def rademacher() -> TwoPoint:
    return TwoPoint(-1.0, 1.0, 0.5)


@dataclass(frozen=True)
class Uniform(StepLaw):
    """Uniform on (-c, c)."""

    c: float = 1.0

    kind = "uniform"
    _SERIES = 0.05  # below this c*lam the Taylor series is used

    def __post_init__(self):
        if not self.c > 0:
            raise AssumptionViolated("P(X=0)<1", "c must be positive")

    @property
    def ess_sup(self):
        return self.c

    @property
    def mean(self):
        return 0.0

    def cgf(self, lam):
        if np.ndim(lam) == 0:
            z = abs(self.c * float(lam))
            if z < self._SERIES:
                return z**2 / 6 - z**4 / 180 + z**6 / 2835 - z**8 / 37800
            return z + math.log1p(-math.exp(-2 * z)) - math.log(2 * z)
        z = np.abs(self.c * np.asarray(lam, dtype=float))
        small = z < self._SERIES
        zs = np.where(small, z, 0.0)
        series = zs**2 / 6 - zs**4 / 180 + zs**6 / 2835 - zs**8 / 37800
        zl = np.where(small, 1.0, z)
        exact = zl + np.log1p(-np.exp(-2 * zl)) - np.log(2 * zl)
        out = np.where(small, series, exact)
        return out if np.ndim(out) else float(out)

    def cgf_prime(self, lam):
        if np.ndim(lam) == 0:
            z = self.c * float(lam)
            if abs(z) < self._SERIES:
                return self.c * (z / 3 - z**3 / 45 + 2 * z**5 / 945 - z**7 / 4725)
            return self.c * (1.0 / math.tanh(z) - 1.0 / z)
        lam = np.asarray(lam, dtype=float)
        z = self.c * lam
        small = np.abs(z) < self._SERIES
        zs = np.where(small, z, 0.0)
        series = zs / 3 - zs**3 / 45 + 2 * zs**5 / 945 - zs**7 / 4725
        zl = np.where(small, 1.0, z)
        exact = 1.0 / np.tanh(zl) - 1.0 / zl
        out = self.c * np.where(small, series, exact)
        return out if np.ndim(out) else float(out)

    def cgf_second(self, lam):
        if np.ndim(lam) == 0:
            z = abs(self.c * float(lam))
            if z < self._SERIES:
                return self.c**2 * (1 / 3 - z**2 / 15 + 2 * z**4 / 189 - z**6 / 675)
            e = math.exp(-2 * z)
            return self.c**2 * (1.0 / z**2 - 4 * e / (1 - e) ** 2)
        lam = np.asarray(lam, dtype=float)
        z = np.abs(self.c * lam)
        small = z < self._SERIES
        zs = np.where(small, z, 0.0)
        series = 1 / 3 - zs**2 / 15 + 2 * zs**4 / 189 - zs**6 / 675
        zl = np.where(small, 1.0, z)
        e = np.exp(-2 * zl)
        exact = 1.0 / zl**2 - 4 * e / (1 - e) ** 2
        out = self.c**2 * np.where(small, series, exact)
        return out if np.ndim(out) else float(out)

    def sf(self, t):
        return float(min(1.0, max(0.0, (self.c - t) / (2 * self.c))))

    def isf(self, q):
        return self.c - 2 * self.c * np.asarray(q)

    def sample(self, rng, size):
        return rng.uniform(-self.c, self.c, size)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


# Y has density C e^{-y} / y^3 on [1, inf).  With E_n the generalised
# exponential integral, E[e^{lam Y}] = E_3(1 - lam) / E_3(1), which stays
# finite at lam = 1 and blows up beyond it.
_E3_AT_1 = float(special.expn(3, 1.0))
_TILTED_MEAN_Y = float(special.expn(2, 1.0)) / _E3_AT_1


@dataclass(frozen=True)
class TiltedPolynomialDensity(StepLaw):
    """X = Y - E[Y] with Y ~ C e^{-y} y^{-3} on [1, inf); lambda* = 1."""

    kind = "tilted"
    lambda_star = 1.0
    closed_at_star = True

    @property
    def ess_sup(self):
        return math.inf

    @property
    def mean(self):
        return 0.0

    @property
    def normaliser(self) -> float:
        return 1.0 / _E3_AT_1

    @property
    def mean_y(self) -> float:
        return _TILTED_MEAN_Y

    def cgf(self, lam):
        u = 1.0 - np.asarray(lam, dtype=float)
        out = np.log(special.expn(3, u)) - math.log(_E3_AT_1) - _TILTED_MEAN_Y * (1.0 - u)
        return out if np.ndim(out) else float(out)

    def cgf_prime(self, lam):
        u = 1.0 - np.asarray(lam, dtype=float)
        out = special.expn(2, u) / special.expn(3, u) - _TILTED_MEAN_Y
        return out if np.ndim(out) else float(out)

    def cgf_second(self, lam):
        u = 1.0 - np.asarray(lam, dtype=float)
        e3 = special.expn(3, u)
        with np.errstate(divide="ignore"):
            out = special.expn(1, u) / e3 - (special.expn(2, u) / e3) ** 2
        return out if np.ndim(out) else float(out)

    def sf(self, t):
        y = t + _TILTED_MEAN_Y
        if y <= 1.0:
            return 1.0
        return float(special.expn(3, y) / (y * y) / _E3_AT_1)

    def isf(self, q):
        scalar = np.ndim(q) == 0
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty_like(q)
        for i, qi in enumerate(q):
            if qi >= 1.0:
                out[i] = 1.0 - _TILTED_MEAN_Y
                continue
            hi = 2.0
            while self.sf(hi) > qi:
                hi *= 2
            out[i] = brentq(lambda t: self.sf(t) - qi, 1.0 - _TILTED_MEAN_Y, hi, xtol=1e-14, rtol=1e-14)
        return float(out[0]) if scalar else out

    def sample(self, rng, size):
        # proposal 1 + Exp(1), accept with probability y^-3
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            y = 1.0 + rng.exponential(1.0, int(need * 3.5) + 16)
            y = y[rng.random(y.size) < y**-3.0][:need]
            out[filled:filled + y.size] = y
            filled += y.size
        return out - _TILTED_MEAN_Y

    def to_dict(self):
        return {"kind": self.kind}


def step_from_dict(d: Mapping) -> StepLaw:
    kind = d.get("kind")
    if kind == "normal":
        return Normal(float(d.get("sigma", 1.0)))
    if kind == "two_point":
        return TwoPoint(float(d["low"]), float(d["high"]), float(d["q"]))
    if kind == "rademacher":
        return rademacher()
    if kind == "uniform":
        return Uniform(float(d.get("c", 1.0)))
    if kind == "lattice":
        return FiniteLattice([(float(x), float(p)) for x, p in d["atoms"]])
    if kind == "tilted":
        return TiltedPolynomialDensity()
    raise ValueError(f"unknown step kind {kind!r}")


def offspring_from_dict(d: Mapping) -> OffspringLaw:
    if "zeta_beta" in d:
        if d.get("probs"):
            # explicit probabilities alongside a zeta tail: kept for validation
            return OffspringLaw(
                probs=tuple(sorted((int(k), float(p)) for k, p in d["probs"].items())),
                zeta_beta=float(d["zeta_beta"]),
            )
        return OffspringLaw.zeta(float(d["zeta_beta"]))
    return OffspringLaw.finite({int(k): float(p) for k, p in d["probs"].items()})


# ---------------------------------------------------------------------------
# validated model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckedModel:
    """An offspring/step pair that passed :func:`validate_model`."""

    offspring: OffspringLaw
    step: StepLaw
    m: float = field(compare=False)
    b: int = field(compare=False)
    mu: float = field(compare=False)
    L: float = field(compare=False)

    @property
    def log_m(self) -> float:
        return math.log(self.m)

    def to_dict(self) -> dict:
        return {"offspring": self.offspring.to_dict(), "step": self.step.to_dict()}


def _check_offspring(off: OffspringLaw) -> None:
    if off.is_zeta:
        beta = off.zeta_beta
        if off.probs:
            s = beta + 1.0
            norm = special.zeta(s)
            for k, p in off.probs:
                expect = k ** (-s) / norm if k >= 1 else 0.0
                if abs(p - expect) > PROB_TOL:
                    raise AssumptionViolated(
                        "inconsistent tail", f"p_{k}={p} does not match a zeta tail with beta={beta}"
                    )
        if not beta > 1:
            raise AssumptionViolated("1<m<inf", f"zeta tail needs beta > 1 for a finite mean (beta={beta})")
        return
    if not off.probs:
        raise AssumptionViolated("probabilities", "empty offspring law")
    for k, p in off.probs:
        if k < 0:
            raise AssumptionViolated("probabilities", f"negative offspring count {k}")
        if p < -PROB_TOL:
            raise AssumptionViolated("probabilities", f"p_{k}={p} is negative")
    total = math.fsum(p for _, p in off.probs)
    if abs(total - 1.0) > PROB_TOL:
        raise AssumptionViolated("probabilities", f"sum of p_k is {total!r}")
    p0 = dict(off.probs).get(0, 0.0)
    if p0 > PROB_TOL:
        raise AssumptionViolated("p_0=0", f"p_0={p0}")
    m = off.mean
    if not 1 < m < math.inf:
        raise AssumptionViolated("1<m<inf", f"m={m}")


def validate_model(offspring: OffspringLaw, step: StepLaw) -> CheckedModel:
    """Check the standing assumptions and return a frozen model handle.

    Raises :class:`AssumptionViolated` naming the first failed condition.
    """
    _check_offspring(offspring)
    if abs(step.mean) > MEAN_TOL:
        raise AssumptionViolated("E[X]=0", f"mean is {step.mean!r}")
    if step.prob_zero >= 1.0 - PROB_TOL:
        raise AssumptionViolated("P(X=0)<1")
    if not step.lambda_star > 0:
        raise AssumptionViolated("E[exp(kX)]<inf", "no positive exponential moment")
    m = offspring.mean
    return CheckedModel(offspring, step, m=m, b=offspring.b, mu=offspring.max_support, L=step.ess_sup)
