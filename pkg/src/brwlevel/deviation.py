"""Upper-deviation rates for level sets.

Given a model, a level slope x > 0 and a target exponent a, this module
decides which decay regime P(Z_n[xn, inf) >= e^{an}) falls in and computes
the corresponding rate or exponent bounds:

* exponential decay with rate I(a, x), an infimum over a split time s;
* double-exponential decay, with bounds on (1/n) log(-log P);
* Pareto-tailed offspring with Gaussian steps, where only bounds exist.

It also prices the explicit forcing strategies used for lower bounds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoSolution, OutOfRange, WrongRegime, ZeroProbability
from .model import CheckedModel, Normal, offspring_alpha
from .rate import rate_I, rate_inverse, speed_xstar
from .cgf import classify_cgf

S_MIN = 1e-6
GRID_POINTS = 512
S_TOL = 1e-10
ASYMPTOTE_RATIO = 1e6
BOUNDARY_RTOL = 1e-6
GOLDEN = (math.sqrt(5) - 1) / 2


class Regime(str, enum.Enum):
    """Decay regime labels as written to regime reports."""

    THM1_L_INF = "THM1_L_INF"  # unbounded steps: exponential decay
    THM1_REMARK_I = "THM1_REMARK_I"  # bounded, no atom at L, some y_s/s < L
    THM1_REMARK_II = "THM1_REMARK_II"  # bounded, atom at L, some y_s/s <= L
    THM2_I = "THM2_I"  # x* = L: double-exponential
    THM2_II = "THM2_II"  # y_s/s > L for every admissible s
    BOUNDARY_OPEN = "BOUNDARY_OPEN"  # inf y_s/s = L without an atom: unresolved
    A_GE_LOGM = "A_GE_LOGM"  # target exceeds the mean growth

    @property
    def exponential(self) -> bool:
        return self in (Regime.THM1_L_INF, Regime.THM1_REMARK_I, Regime.THM1_REMARK_II)

    @property
    def double_exponential(self) -> bool:
        return self in (Regime.THM2_I, Regime.THM2_II)


class Strategy(str, enum.Enum):
    B_ARY = "B_ARY"  # force b-ary splitting with steps near L
    ALPHA_ARY = "ALPHA_ARY"  # force alpha-ary splitting with steps >= x
    MAX_BOOST = "MAX_BOOST"  # push the maximum high, then evolve freely


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialRate:
    I_ax: float
    s_star: float
    y_star: float
    regime: Regime
    diagnostics: dict = field(default_factory=dict, compare=False)
    kind = "EXPONENTIAL"


@dataclass(frozen=True)
class DoubleExpBounds:
    """Bounds on lim (1/n) log(-log P).

    When ``lower_positive`` is set the true lower limit is known to be
    strictly positive even though ``lower_exponent`` (a proven value) may
    be 0.
    """

    lower_exponent: float
    upper_exponent: float
    lower_positive: bool
    regime: Regime
    diagnostics: dict = field(default_factory=dict, compare=False)
    kind = "DOUBLE_EXP"


@dataclass(frozen=True)
class ParetoBounds:
    """Bounds on lim (1/n) log P (both negative)."""

    lower_rate: float
    upper_rate: float
    diagnostics: dict = field(default_factory=dict, compare=False)
    kind = "PARETO"


@dataclass(frozen=True)
class Unresolved:
    reason: str
    regime: Regime
    diagnostics: dict = field(default_factory=dict, compare=False)
    kind = "UNRESOLVED"


def result_to_dict(res) -> dict:
    out = {"kind": res.kind}
    for k, v in res.__dict__.items():
        out[k] = v.value if isinstance(v, enum.Enum) else v
    return out


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def golden_min(f: Callable[[float], float], lo: float, hi: float, tol: float = S_TOL) -> tuple[float, float]:
    """Golden-section search for a local minimum of f on [lo, hi]."""
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol * max(1.0, abs(lo)):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _grid_then_golden(f: Callable[[float], float], s_hi: float, points: int) -> tuple[float, float]:
    """Minimise f over (0, s_hi]: log-uniform grid from S_MIN, then golden refinement."""
    if s_hi <= S_MIN:
        return s_hi, f(s_hi)
    grid = np.geomspace(S_MIN, s_hi, points)
    grid[-1] = s_hi
    vals = np.array([f(float(s)) for s in grid])
    i = int(np.argmin(vals))
    best_s, best_v = float(grid[i]), float(vals[i])
    if not math.isfinite(best_v):
        return best_s, best_v
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, points - 1)])
    s, v = golden_min(f, lo, hi)
    if v < best_v:
        best_s, best_v = s, v
    return best_s, best_v


def s_upper(model: CheckedModel, a: float, eps: float = 0.0) -> float:
    """Largest admissible split time 1 - (a - eps)/log m."""
    return 1.0 - (a - eps) / model.log_m


def _check_query(model: CheckedModel, a: float, x: float) -> None:
    if not x > 0:
        raise ValueError(f"x must be positive (x={x})")
    lm = model.log_m
    typical = max(lm - rate_I(model.step, x), 0.0)
    if not a > typical:
        raise ValueError(f"a={a} must exceed (log m - I(x))^+ = {typical}")
    if not a < lm:
        raise ValueError(f"a={a} must be below log m = {lm}")


def _check_exp_moment(model: CheckedModel) -> None:
    if model.offspring.is_zeta:
        raise WrongRegime("offspring law has no exponential moment; use pareto_bounds")


# ---------------------------------------------------------------------------
# y_s and the objective
# ---------------------------------------------------------------------------


def solve_ys(model: CheckedModel, a: float, x: float, s: float, eps: float = 0.0) -> float:
    """Root y in (0, x] of log m - I((x - y)/(1 - s)) = a/(1 - s).

    With ``eps > 0`` solves the perturbed equation
    (1-s) log m - (1-s) I((x - eps - y)/(1-s) - eps) = a - eps instead.
    """
    lm = model.log_m
    s_hi = s_upper(model, a, eps)
    if not 0 < s < 1:
        raise NoSolution(f"s={s} outside (0, 1)")
    v = lm - (a - eps) / (1.0 - s)
    if s > s_hi:
        if v < -1e-12:
            raise NoSolution(f"s={s} exceeds 1 - a/log m = {s_hi}")
    v = max(v, 0.0)
    xbar = rate_inverse(model.step, v)
    return x - eps - (1.0 - s) * (xbar + eps)


def _objective(model: CheckedModel, a: float, x: float, eps: float = 0.0) -> Callable[[float], float]:
    """s -> s I(y_s/s - eps) - s log m, extended-valued."""
    step = model.step
    lm = model.log_m
    prof = classify_cgf(step)

    def f(s: float) -> float:
        y = solve_ys(model, a, x, s, eps)
        z = y / s - eps
        if prof.case == "I" and z > ASYMPTOTE_RATIO:
            # s I(y/s) ~ kappa y with kappa infinite
            return math.inf
        i = rate_I(step, z)
        if math.isinf(i):
            return math.inf
        return s * i - s * lm

    return f


def _kappa(model: CheckedModel) -> float:
    prof = classify_cgf(model.step)
    return math.inf if prof.case == "II" else prof.lambda_star


def _minimise(model: CheckedModel, a: float, x: float, eps: float = 0.0) -> tuple[float, float]:
    """(s*, value) of the objective; s* = 0 when the infimum is the s -> 0 limit.

    With a finite slope kappa = lim I(t)/t the objective tends to
    kappa * y(0, eps) as s -> 0, which can undercut every interior value.
    """
    s_hi = min(s_upper(model, a, eps), 1.0 - 1e-12)
    s_star, val = _grid_then_golden(_objective(model, a, x, eps), s_hi, GRID_POINTS)
    kappa = _kappa(model)
    if math.isfinite(kappa):
        xbar0 = rate_inverse(model.step, max(model.log_m - (a - eps), 0.0))
        limit = kappa * (x - eps - (xbar0 + eps))
        if limit < val:
            return 0.0, limit
    return s_star, val


def perturbed_supremum(model: CheckedModel, a: float, x: float, eps: float) -> float:
    """L_eps = sup_s {s log m - s I(y(s, eps)/s - eps)}; L_0 = -I(a, x)."""
    _check_query(model, a, x)
    return -_minimise(model, a, x, eps)[1]


def ratio_infimum(model: CheckedModel, a: float, x: float, points: int = GRID_POINTS) -> tuple[float, float]:
    """(inf_s y_s/s, argmin s) over the admissible split times."""
    s_hi = s_upper(model, a)
    return _grid_then_golden(lambda s: solve_ys(model, a, x, s) / s, s_hi, points)[::-1]


# ---------------------------------------------------------------------------
# regime and rates
# ---------------------------------------------------------------------------


def classify_regime(model: CheckedModel, a: float, x: float, points: int = GRID_POINTS) -> Regime:
    """Which decay regime the query (a, x) falls in."""
    lm = model.log_m
    if a >= lm:
        return Regime.A_GE_LOGM
    _check_query(model, a, x)
    L = model.L
    if math.isinf(L):
        return Regime.THM1_L_INF
    if not x < L:
        raise ValueError(f"x={x} must lie below the essential supremum L={L}")
    if speed_xstar(model) >= L:
        return Regime.THM2_I
    inf_ratio, _ = ratio_infimum(model, a, x, points)
    tol = BOUNDARY_RTOL * (1.0 + L)
    if model.step.mass_at_sup > 0:
        return Regime.THM1_REMARK_II if inf_ratio <= L + tol else Regime.THM2_II
    if abs(inf_ratio - L) < tol:
        return Regime.BOUNDARY_OPEN
    return Regime.THM1_REMARK_I if inf_ratio < L else Regime.THM2_II


def rate_Iax(model: CheckedModel, a: float, x: float) -> ExponentialRate:
    """I(a, x) = inf over admissible s of s I(y_s/s) - s log m, with its minimiser."""
    _check_exp_moment(model)
    regime = classify_regime(model, a, x)
    if not regime.exponential:
        raise WrongRegime(f"query is in regime {regime.value}, not an exponential one")
    s_hi = s_upper(model, a)
    s_star, val = _minimise(model, a, x)
    if s_star == 0.0:
        y_star = x - rate_inverse(model.step, model.log_m - a)
        ratio = math.inf
    else:
        y_star = solve_ys(model, a, x, s_star)
        ratio = y_star / s_star
    diag = {
        "s_upper": s_hi,
        "y_over_s": ratio,
        "x_star": speed_xstar(model),
        "attained_at_boundary": s_star == 0.0,
    }
    if isinstance(model.step, Normal) and model.step.sigma == 1.0:
        diag["closed_form"] = gaussian_Iax(model.m, a, x)
    return ExponentialRate(I_ax=val, s_star=s_star, y_star=y_star, regime=regime, diagnostics=diag)


def gaussian_Iax(m: float, a: float, x: float) -> float:
    """Closed form of I(a, x) for standard normal steps."""
    lm = math.log(m)
    return x * x * lm / (2.0 * (lm - a)) - lm


def u_function(model: CheckedModel, a: float, x: float) -> Callable[[float], float]:
    """c -> log m - I(L + (x - L)/(1 - c)) - (a - log b)/(1 - c) on [0, x/L]."""
    lm, L, log_b = model.log_m, model.L, math.log(model.b)
    step = model.step

    def u(c: float) -> float:
        return lm - rate_I(step, L + (x - L) / (1.0 - c)) - (a - log_b) / (1.0 - c)

    return u


def cstar(model: CheckedModel, a: float, x: float) -> float:
    """Unique root c* in (0, x/L) of u(c) = log b, by bisection."""
    regime = classify_regime(model, a, x)
    if not regime.double_exponential:
        raise WrongRegime(f"c* needs a double-exponential regime, got {regime.value}")
    u = u_function(model, a, x)
    log_b = math.log(model.b)
    lo, hi = 0.0, x / model.L
    if not (u(lo) < log_b < u(hi)):
        raise NoSolution("u(0) < log b < u(x/L) fails")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if u(mid) < log_b:
            lo = mid
        else:
            hi = mid
    c = lo if abs(u(lo) - log_b) <= abs(u(hi) - log_b) else hi
    return c


def double_exp_bounds(model: CheckedModel, a: float, x: float) -> DoubleExpBounds:
    """Exponent bounds for (1/n) log(-log P) in the double-exponential regimes."""
    _check_exp_moment(model)
    lm = model.log_m
    off = model.offspring
    if a >= lm:
        if any(p >= 1.0 for k, p in off.probs if k >= 2):
            raise WrongRegime("deterministic branching: the event reduces to a minimum-position event")
        if a > math.log(model.mu) + 1e-12:
            raise OutOfRange(f"a={a} exceeds log mu = {math.log(model.mu)}")
        if not 0 < x < model.L:
            raise ValueError(f"x={x} must lie in (0, L)")
        alpha = offspring_alpha(off, a)
        lower = a - lm
        positive = lower > 0 or math.isfinite(model.L)
        return DoubleExpBounds(
            lower_exponent=lower,
            upper_exponent=math.log(alpha),
            lower_positive=positive,
            regime=Regime.A_GE_LOGM,
            diagnostics={"alpha": alpha, "mu": model.mu},
        )
    regime = classify_regime(model, a, x)
    if not regime.double_exponential:
        raise WrongRegime(f"query is in regime {regime.value}")
    c = cstar(model, a, x)
    return DoubleExpBounds(
        lower_exponent=0.0,
        upper_exponent=c * math.log(model.b),
        lower_positive=True,
        regime=regime,
        diagnostics={"c_star": c, "b": model.b},
    )


def pareto_bounds(m: float, beta: float, a: float, x: float) -> ParetoBounds:
    """Bounds on (1/n) log P for Pareto(beta) offspring tails and N(0,1) steps."""
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    typical = math.log(m) - x * x / 2.0
    if not a > max(typical, 0.0):
        raise ValueError(f"a={a} must exceed (log m - x^2/2)^+ = {max(typical, 0.0)}")
    lower = -((beta - 1.0) * a + a - typical)
    upper = -(a - typical)
    return ParetoBounds(lower_rate=lower, upper_rate=upper, diagnostics={"typical_exponent": typical})


def solve(model: CheckedModel, a: float, x: float):
    """Dispatch a query to the operation matching its regime."""
    regime = classify_regime(model, a, x)
    if regime.exponential:
        return rate_Iax(model, a, x)
    if regime is Regime.BOUNDARY_OPEN:
        return Unresolved(reason="inf_s y_s/s equals L and P(X=L)=0: decay scale unknown", regime=regime)
    return double_exp_bounds(model, a, x)


# ---------------------------------------------------------------------------
# forced strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForcedWeight:
    """Exact log-probability of a forced prefix.

    The prefix probability is p_branch^branch_exponent * p_step^step_exponent.
    ``log_prob`` may be -inf when the exponents overflow floats; the doubled
    log ``log_neg_log_prob`` = log(-log P) stays finite.
    """

    branch_exponent: int
    step_exponent: int
    log_prob: float
    log_neg_log_prob: float


def forced_prefix_weight(k: int, generations: int, p_branch: float, p_step: float) -> ForcedWeight:
    """Every particle in the first ``generations`` generations has exactly k
    children, each with a forced step of probability ``p_step``."""
    if generations < 0:
        raise ValueError("generations must be >= 0")
    branch_exp = sum(k**i for i in range(generations))
    step_exp = k * branch_exp
    if (branch_exp and p_branch <= 0) or (step_exp and p_step <= 0):
        raise ZeroProbability("forced event has zero probability")
    terms = []
    if branch_exp and p_branch < 1:
        terms.append(math.log(branch_exp) + math.log(-math.log(p_branch)))
    if step_exp and p_step < 1:
        terms.append(math.log(step_exp) + math.log(-math.log(p_step)))
    log_neg = float(np.logaddexp.reduce(terms)) if terms else -math.inf
    try:
        lp = float(branch_exp) * math.log(p_branch) if branch_exp else 0.0
        lp += float(step_exp) * math.log(p_step) if step_exp else 0.0
    except OverflowError:
        lp = -math.inf
    return ForcedWeight(branch_exp, step_exp, lp, log_neg)


def strategy_log_prob(
    model: CheckedModel,
    strategy: Strategy,
    n: int,
    *,
    eta: float | None = None,
    x: float | None = None,
    alpha: int | None = None,
    a: float | None = None,
) -> ForcedWeight:
    """Log-probability of the forced prefix of a lower-bound strategy.

    B_ARY forces b children and steps >= L - eta for ``n`` generations
    (pass the horizon t_n as ``n``).  ALPHA_ARY forces ``alpha`` children
    (or the alpha matching ``a``) and steps >= x over ``n`` generations.
    """
    strategy = Strategy(strategy)
    off, step = model.offspring, model.step
    if strategy is Strategy.B_ARY:
        if eta is None or not eta > 0 or math.isinf(model.L):
            raise ValueError("B_ARY needs eta > 0 and a finite essential supremum")
        b = model.b
        return forced_prefix_weight(b, n, off.pmf(b), step.sf(model.L - eta))
    if strategy is Strategy.ALPHA_ARY:
        if alpha is None:
            if a is None:
                raise ValueError("ALPHA_ARY needs alpha or a")
            alpha = offspring_alpha(off, a)
        if math.isinf(alpha) or x is None:
            raise ValueError("ALPHA_ARY needs a finite alpha and a level x")
        return forced_prefix_weight(int(alpha), n, off.pmf(int(alpha)), step.sf(x))
    raise ValueError(f"{strategy.value} has no forced prefix")
