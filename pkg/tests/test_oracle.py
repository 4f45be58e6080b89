import math
from fractions import Fraction

import numpy as np
import pytest

from brwlevel import FiniteLattice, Normal, OffspringLaw, TiltedPolynomialDensity, Uniform, rademacher, validate_model
from brwlevel.deviation import gaussian_Iax, rate_Iax
from brwlevel.errors import TooLarge
from brwlevel.oracle import (
    enumerate_level_dist,
    exact_level_dist,
    exact_upper_dev,
    grid_infimum_Iax,
    grid_legendre,
    gw_population_pmf,
)

from conftest import BINARY, HALF_HALF, LOG15


def test_binary_one_generation(rad_binary):
    d = exact_level_dist(rad_binary, 1, 1.0, exact=True)
    assert list(d.pmf) == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]


def test_binary_two_generations_matches_enumeration(rad_binary):
    d = exact_level_dist(rad_binary, 2, 2.0, exact=True)
    e = enumerate_level_dist(rad_binary, 2, 2.0)
    assert list(d.pmf) == list(e.pmf)
    # all four leaves at +2 needs all six steps up
    assert d.pmf[4] == Fraction(1, 64)


def test_half_half_three_generations_matches_enumeration(rad_model):
    d = exact_level_dist(rad_model, 3, 1.0, exact=True)
    e = enumerate_level_dist(rad_model, 3, 1.0)
    assert list(d.pmf) == list(e.pmf)
    assert sum(d.pmf) == 1


@pytest.mark.parametrize(
    "off, step, n",
    [
        (BINARY, rademacher(), 4),
        (HALF_HALF, rademacher(), 4),
        (OffspringLaw.finite({1: 0.25, 4: 0.75}), rademacher(), 2),
        (OffspringLaw.finite({2: 0.5, 3: 0.5}), FiniteLattice([(-1.0, 0.5), (0.0, 0.25), (2.0, 0.25)]), 2),
        (OffspringLaw.finite({1: 1 / 3, 2: 2 / 3}), FiniteLattice([(-1.0, 1 / 3), (0.0, 1 / 3), (1.0, 1 / 3)]), 3),
    ],
)
def test_dp_equals_enumeration_exactly(off, step, n):
    m = validate_model(off, step)
    for y in (-math.inf, -1.0, 0.0, 1.0, 2.0):
        assert list(exact_level_dist(m, n, y, exact=True).pmf) == list(enumerate_level_dist(m, n, y).pmf)


def test_upper_dev_examples(rad_binary, rad_model):
    assert exact_upper_dev(rad_binary, math.log(2), 1.0, 1) == pytest.approx(0.25, abs=1e-15)
    p = exact_upper_dev(rad_model, 0.0, 1.0, 2, exact=True)
    e = enumerate_level_dist(rad_model, 2, 2.0)
    assert p == 1 - e.pmf[0]
    assert exact_upper_dev(rad_model, math.log(5) / 2, 0.0, 2) == 0


def test_total_population_matches_galton_watson(rad_model):
    for n in range(5):
        d = exact_level_dist(rad_model, n, -math.inf)
        g = gw_population_pmf(rad_model.offspring, n)
        assert np.allclose(d.pmf.astype(float), np.pad(g, (0, d.pmf.size - g.size)).astype(float), atol=1e-12)
        assert d.pmf[0] == 0


def test_longdouble_agrees_with_rationals(rad_model):
    d = exact_level_dist(rad_model, 5, 2.0)
    e = exact_level_dist(rad_model, 5, 2.0, exact=True)
    assert np.allclose(d.as_float(), e.as_float(), atol=1e-15)
    assert d.pmf.dtype == np.longdouble


def test_size_limits(rad_model):
    with pytest.raises(TooLarge):
        exact_level_dist(rad_model, 6, 0.0)
    with pytest.raises(TooLarge):
        exact_level_dist(validate_model(OffspringLaw.finite({1: 0.5, 5: 0.5}), rademacher()), 2, 0.0)
    with pytest.raises(TypeError):
        exact_level_dist(validate_model(HALF_HALF, Normal(1.0)), 2, 0.0)


def test_pmf_csv(tmp_path, rad_model):
    d = exact_level_dist(rad_model, 2, 0.0)
    d.write_csv(tmp_path / "pmf.csv")
    lines = (tmp_path / "pmf.csv").read_text().splitlines()
    assert lines[0] == "count,probability"
    assert len(lines) == d.pmf.size + 1


def test_grid_legendre_normal():
    assert grid_legendre(Normal(1.0), 1.0, lam_hi=10.0, points=100_000) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("step", [Normal(1.0), rademacher(), Uniform(1.0), TiltedPolynomialDensity()])
def test_grid_legendre_zero(step):
    assert grid_legendre(step, 0.0) == 0.0


def test_grid_legendre_clipped_to_domain():
    step = TiltedPolynomialDensity()
    # beyond T the sup sits at lambda* = 1
    assert grid_legendre(step, 2.0) == pytest.approx(2.0 - float(step.cgf(1.0)), abs=1e-12)


def test_grid_infimum_gaussian(normal_model):
    g = grid_infimum_Iax(normal_model, 0.2, 1.0, 2000, 2000)
    assert abs(g.value - 0.581236) < 1e-3
    assert g.value >= rate_Iax(normal_model, 0.2, 1.0).I_ax - 1e-6


def test_grid_infimum_empty(normal_model):
    g = grid_infimum_Iax(normal_model, LOG15, 1.0, 200, 200)
    assert g.empty and g.value == math.inf


def test_grid_infimum_refinement_is_monotone(normal_model):
    exact = gaussian_Iax(1.5, 0.3, 1.2)
    vals = [grid_infimum_Iax(normal_model, 0.3, 1.2, k, k).value for k in (250, 500, 1000)]
    assert vals[0] >= vals[1] >= vals[2] >= exact - 1e-6
    assert vals[2] - exact < vals[0] - exact
