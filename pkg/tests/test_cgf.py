import math

import pytest

from brwlevel import Normal, TiltedPolynomialDensity, Uniform, cgf, cgf_prime, classify_cgf, rademacher
from brwlevel.errors import DomainExceeded
from brwlevel.model import FiniteLattice, TwoPoint

STEPS = [Normal(1.0), Normal(0.4), rademacher(), TwoPoint(-1.0, 3.0, 0.25), Uniform(1.0), TiltedPolynomialDensity(),
         FiniteLattice([(-2.0, 0.3), (0.0, 0.4), (1.0, 0.3)])]


def test_normal_value():
    assert cgf(Normal(1.0), 2.0) == pytest.approx(2.0, abs=1e-15)


@pytest.mark.parametrize("step", STEPS)
def test_zero_at_origin(step):
    assert cgf(step, 0.0) == 0.0


def test_rademacher_log_cosh():
    assert cgf(rademacher(), 1.0) == pytest.approx(math.log(math.cosh(1.0)), abs=1e-15)
    assert cgf(rademacher(), 1.0) == pytest.approx(0.433781, abs=1e-6)


def test_uniform_small_and_large_lambda():
    u = Uniform(1.0)
    for lam in (1e-4, 0.049, 0.051, 3.0, 40.0):
        assert cgf(u, lam) == pytest.approx(math.log(math.sinh(lam) / lam), rel=1e-12)


def test_domain_checks():
    t = TiltedPolynomialDensity()
    assert math.isfinite(cgf(t, 1.0))
    with pytest.raises(DomainExceeded):
        cgf(t, 1.0 + 1e-9)
    with pytest.raises(DomainExceeded):
        cgf_prime(Normal(1.0), -0.1)


def test_classify_normal():
    p = classify_cgf(Normal(1.0))
    assert (p.case, p.lambda_star, p.L) == ("I", math.inf, math.inf)


def test_classify_rademacher():
    p = classify_cgf(rademacher())
    assert (p.case, p.L, p.mass_at_L) == ("II", 1.0, 0.5)


def test_classify_uniform_has_no_mass_at_top():
    p = classify_cgf(Uniform(1.0))
    assert (p.case, p.L, p.mass_at_L) == ("II", 1.0, 0.0)


def test_classify_tilted():
    p = classify_cgf(TiltedPolynomialDensity())
    assert p.case == "III" and p.lambda_star == 1.0
    assert 0 < p.T < math.inf
    assert p.T == pytest.approx(float(TiltedPolynomialDensity().cgf_prime(1.0)))


@pytest.mark.parametrize("step", STEPS)
def test_slope_at_origin_is_mean(step):
    h = 1e-5
    fd = (float(step.cgf(h)) - float(step.cgf(-h))) / (2 * h) if step.lambda_star == math.inf else float(step.cgf(h)) / h
    assert abs(float(step.cgf_prime(0.0))) < 1e-8
    assert abs(fd) < 1e-4
