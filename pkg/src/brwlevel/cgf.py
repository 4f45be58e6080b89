"""Cumulant generating function of the step law and its classification."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainExceeded
from .model import StepLaw

DIVERGENCE_THRESHOLD = 1e8


@dataclass(frozen=True)
class CgfProfile:
    """Shape of Lambda near the edge of its domain.

    case "I":   Lambda' increases to infinity at lambda_star.
    case "II":  lambda_star is infinite and Lambda' tends to L < inf.
    case "III": lambda_star is finite and Lambda' tends to T < inf.
    """

    lambda_star: float
    L: float
    case: str
    T: float | None = None
    mass_at_L: float | None = None

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "L": self.L,
            "case": self.case,
            "T": self.T,
            "mass_at_L": self.mass_at_L,
        }


def _check_domain(step: StepLaw, lam: float) -> None:
    if lam < 0:
        raise DomainExceeded(f"lambda={lam} < 0")
    ls = step.lambda_star
    if lam > ls or (lam == ls and not step.closed_at_star):
        raise DomainExceeded(f"lambda={lam} outside domain (lambda*={ls})")


def cgf(step: StepLaw, lam: float) -> float:
    """Lambda(lam) = log E[exp(lam X)]."""
    _check_domain(step, lam)
    if lam == 0:
        return 0.0
    return float(step.cgf(lam))


def cgf_prime(step: StepLaw, lam: float) -> float:
    _check_domain(step, lam)
    return float(step.cgf_prime(lam))


def _approach_grid(lambda_star: float) -> np.ndarray:
    if math.isinf(lambda_star):
        return 2.0 ** np.arange(0, 64)
    return lambda_star * (1.0 - 2.0 ** -np.arange(1, 53, dtype=float))


@lru_cache(maxsize=None)
def classify_cgf(step: StepLaw) -> CgfProfile:
    """Sort the step law into one of the three CGF cases.

    Lambda' is evaluated along a geometric grid approaching lambda_star;
    exceeding DIVERGENCE_THRESHOLD counts as divergence.
    """
    ls = step.lambda_star
    grid = _approach_grid(ls)
    with np.errstate(all="ignore"):
        slopes = np.array([step.cgf_prime(t) for t in grid], dtype=float)
    slopes = slopes[np.isfinite(slopes)]
    diverges = slopes.size == 0 or slopes.max() > DIVERGENCE_THRESHOLD
    L = step.ess_sup
    if diverges:
        return CgfProfile(lambda_star=ls, L=L, case="I")
    if math.isinf(ls):
        return CgfProfile(lambda_star=ls, L=L, case="II", mass_at_L=step.mass_at_sup)
    T = float(step.cgf_prime(ls)) if step.closed_at_star else float(slopes[-1])
    return CgfProfile(lambda_star=ls, L=L, case="III", T=T)
