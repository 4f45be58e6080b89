"""Level-set upper deviations for supercritical branching random walks."""
from .model import (
    CheckedModel,
    FiniteLattice,
    Normal,
    OffspringLaw,
    TiltedPolynomialDensity,
    TwoPoint,
    Uniform,
    rademacher,
    validate_model,
)
from .cgf import classify_cgf, cgf, cgf_prime
from .rate import biggins_growth, rate_I, rate_inverse, speed_xstar
from .deviation import (
    Regime,
    Strategy,
    classify_regime,
    cstar,
    double_exp_bounds,
    pareto_bounds,
    rate_Iax,
    solve,
    solve_ys,
    strategy_log_prob,
)

__version__ = "0.1.0"
