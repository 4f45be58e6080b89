import math

import numpy as np
import pytest
from scipy import integrate, special

from brwlevel import FiniteLattice, Normal, OffspringLaw, TiltedPolynomialDensity, TwoPoint, Uniform, rademacher
from brwlevel.errors import AssumptionViolated
from brwlevel.model import K_MAX, offspring_alpha, offspring_from_dict, step_from_dict, validate_model

from conftest import HALF_HALF


def test_valid_model_records_m_b_mu():
    m = validate_model(HALF_HALF, Normal(1.0))
    assert m.m == pytest.approx(1.5)
    assert (m.b, m.mu) == (2, 2)
    assert m.L == math.inf


def test_positive_p0_rejected():
    with pytest.raises(AssumptionViolated) as exc:
        validate_model(OffspringLaw.finite({0: 0.1, 2: 0.9}), Normal(1.0))
    assert exc.value.condition == "p_0=0"


def test_zeta_tail_contradicting_probs_rejected():
    off = offspring_from_dict({"probs": {"2": 1.0}, "zeta_beta": 2.0})
    with pytest.raises(AssumptionViolated) as exc:
        validate_model(off, Normal(1.0))
    assert exc.value.condition == "inconsistent tail"


@pytest.mark.parametrize(
    "probs, cond",
    [
        ({1: 1.0}, "1<m<inf"),
        ({1: 0.5, 2: 0.4}, "probabilities"),
        ({1: -0.1, 2: 1.1}, "probabilities"),
    ],
)
def test_bad_offspring(probs, cond):
    with pytest.raises(AssumptionViolated) as exc:
        validate_model(OffspringLaw.finite(probs), Normal(1.0))
    assert exc.value.condition == cond


def test_degenerate_step_rejected():
    with pytest.raises(AssumptionViolated) as exc:
        validate_model(HALF_HALF, FiniteLattice([(3.0, 1.0)]))
    assert exc.value.condition == "P(X=0)<1"


def test_zeta_needs_beta_above_one():
    with pytest.raises(AssumptionViolated):
        validate_model(OffspringLaw.zeta(0.8), Normal(1.0))


@pytest.mark.parametrize(
    "support, a, expected",
    [((1, 2, 5), math.log(3), 5), ((1, 2), math.log(2), 2), ((1, 2), math.log(5), math.inf)],
)
def test_offspring_alpha(support, a, expected):
    off = OffspringLaw.finite({k: 1 / len(support) for k in support})
    assert offspring_alpha(off, a) == expected


def test_b_is_in_support_and_above_mean():
    off = OffspringLaw.finite({1: 0.2, 3: 0.5, 4: 0.3})
    assert off.b == 3 and off.b >= off.mean


def test_lattice_is_centred_on_construction():
    lat = FiniteLattice([(0.0, 0.5), (2.0, 0.25), (5.0, 0.25)])
    assert lat.mean == pytest.approx(0.0, abs=1e-14)
    assert lat.ess_sup == pytest.approx(5.0 - 1.75)


def test_two_point_high_probability_is_q():
    tp = TwoPoint(-1.0, 2.0, 1 / 3)
    assert tp.mean == pytest.approx(0.0, abs=1e-14)
    assert tp.mass_at_sup == pytest.approx(1 / 3)


def test_step_round_trip():
    for step in (Normal(2.0), rademacher(), TwoPoint(-1.0, 2.0, 1 / 3), Uniform(0.5), TiltedPolynomialDensity(),
                 FiniteLattice([(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)])):
        again = step_from_dict(step.to_dict())
        assert again.to_dict() == step.to_dict()


def test_tilted_closed_forms_match_quadrature():
    step = TiltedPolynomialDensity()
    norm = integrate.quad(lambda y: math.exp(-y) / y**3, 1, np.inf, epsabs=0, epsrel=1e-13)[0]
    mean_y = integrate.quad(lambda y: math.exp(-y) / y**2, 1, np.inf, epsabs=0, epsrel=1e-13)[0] / norm
    for lam in (0.3, 0.9, 1.0):
        mgf = integrate.quad(lambda y: math.exp((lam - 1) * y) / y**3, 1, np.inf, epsabs=0, epsrel=1e-13)[0] / norm
        assert float(step.cgf(lam)) == pytest.approx(math.log(mgf) - lam * mean_y, rel=1e-10)
    t = 0.7
    tail = integrate.quad(lambda y: math.exp(-y) / y**3, t + mean_y, np.inf, epsabs=0, epsrel=1e-13)[0] / norm
    assert float(step.sf(t)) == pytest.approx(tail, rel=1e-10)


def test_tilted_sampler_mean_and_tail():
    step = TiltedPolynomialDensity()
    x = step.sample(np.random.default_rng(5), 400_000)
    assert abs(x.mean()) < 4 * x.std() / math.sqrt(x.size)
    assert np.mean(x >= 0.5) == pytest.approx(float(step.sf(0.5)), abs=4e-3)


def test_zeta_tail_bounds_hold_on_truncated_sum():
    off = OffspringLaw.zeta(2.0)
    c1, c2 = off.tail_constants
    s = 3.0
    k = np.arange(1, 200_001, dtype=float)
    pk = k**-s / special.zeta(s)
    tails = 1.0 - np.cumsum(pk)  # P(Z > k) up to truncation error ~ 1e-11
    for y in (1.0, 2.5, 10.0, 137.0, 5000.0):
        t = tails[int(math.floor(y)) - 1]
        assert c1 * y**-2 <= t + 1e-10
        assert t <= c2 * y**-2 + 1e-10
        assert off.tail(y) == pytest.approx(t, rel=1e-6)


def test_zeta_mean_and_truncation_mass():
    off = OffspringLaw.zeta(2.0)
    assert off.mean == pytest.approx(special.zeta(2.0) / special.zeta(3.0))
    assert 0 < off.truncation_mass < K_MAX**-2


@pytest.mark.parametrize("step", [Normal(1.0), rademacher(), Uniform(1.0), TiltedPolynomialDensity()])
def test_conditioned_sampler_respects_lower_bound(step):
    rng = np.random.default_rng(3)
    lower = float(step.isf(0.01)) if step.ess_sup == math.inf else 0.9 * step.ess_sup
    x = step.sample_at_least(rng, 5000, lower)
    assert (x >= lower).all()


def test_conditioned_sampler_low_acceptance_uses_inverse_transform():
    step = Normal(1.0)
    x = step.sample_at_least(np.random.default_rng(1), 20_000, 4.0)
    # E[X | X >= 4] = phi(4)/Phi(-4) ~ 4.2256
    assert x.min() >= 4.0
    assert x.mean() == pytest.approx(4.2256, abs=0.01)


def test_offspring_sampler_frequencies():
    off = OffspringLaw.finite({1: 0.2, 3: 0.5, 4: 0.3})
    k = off.sample(np.random.default_rng(0), 200_000)
    for v, p in off.probs:
        assert np.mean(k == v) == pytest.approx(p, abs=5e-3)
