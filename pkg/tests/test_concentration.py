import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andersonlab import (SiteDistributionSpec, concentration_S, holder_constant,
                         moment_order_md, profile_for, q_lambda, wegner_Q)

UNIFORM = SiteDistributionSpec("uniform", M=1.0)
POWER_HALF = SiteDistributionSpec("power", M=1.0, alpha=0.5)
TRIANGULAR = SiteDistributionSpec("triangular", M=1.0)
FAMILIES = [UNIFORM, SiteDistributionSpec("uniform", M=2.0), POWER_HALF,
            SiteDistributionSpec("power", M=1.0, alpha=2.0), TRIANGULAR]


# ---------------------------------------------------------------------------
# S


def test_S_uniform():
    assert concentration_S(UNIFORM, 0.25) == 0.25


@pytest.mark.parametrize("dist", FAMILIES)
def test_S_no_atoms(dist):
    assert concentration_S(dist, 0.0) == 0.0


def test_S_power_half_value_and_grid_sup():
    assert concentration_S(POWER_HALF, 0.04) == pytest.approx(0.2, abs=1e-12)
    # numerical sup over window positions confirms the closed form
    a = np.arange(0.0, 1.0, 1e-4)
    masses = POWER_HALF.cdf(a + 0.04) - POWER_HALF.cdf(a)
    assert float(masses.max()) <= 0.2 + 1e-12
    assert float(masses.max()) == pytest.approx(0.2, abs=1e-6)


@pytest.mark.parametrize("dist", FAMILIES)
def test_S_dominates_every_window(dist):
    a = np.linspace(-0.5, dist.M, 500)
    for s in (0.01, 0.1, 0.5):
        masses = dist.cdf(np.maximum(a + s, 0.0)) - dist.cdf(np.maximum(a, 0.0))
        assert concentration_S(dist, s) >= float(masses.max()) - 1e-12


@pytest.mark.parametrize("dist", FAMILIES)
def test_S_empirical(dist):
    rng = np.random.default_rng(12)
    draws = dist.ppf(rng.random(100_000))
    for s in (0.01, 0.1, 0.5):
        p = concentration_S(dist, s * dist.M)
        # evaluate the empirical mass of the maximizing window of each family
        if dist.family == "triangular":
            a = dist.M / 2.0 - s * dist.M / 2.0
        elif dist.family == "power" and dist.alpha > 1.0:
            a = dist.M - s * dist.M
        else:
            a = 0.0
        emp = float(np.mean((draws >= a) & (draws <= a + s * dist.M)))
        tol = 3.0 * math.sqrt(p * (1.0 - p) / draws.size) + 1e-12
        assert abs(emp - p) <= tol


# ---------------------------------------------------------------------------
# Q


def test_Q_uniform_values():
    assert wegner_Q(UNIFORM, 0.1) == pytest.approx(0.1, abs=1e-15)
    assert wegner_Q(UNIFORM, 0.1, m=1) == pytest.approx(0.2, abs=1e-15)
    assert wegner_Q(UNIFORM, 0.05, m=4) == pytest.approx(0.1, abs=1e-15)
    assert wegner_Q(UNIFORM, 0.05, m=4) <= (1 + 1) ** 4 * 0.05


def test_Q_unbounded_density_branch():
    # power alpha < 1 has no bounded density: Q = 8 S
    assert wegner_Q(POWER_HALF, 0.04) == pytest.approx(8.0 * 0.2, abs=1e-12)


@pytest.mark.parametrize("dist", FAMILIES)
def test_Q_vanishes_at_zero(dist):
    assert wegner_Q(dist, 0.0) == 0.0


@given(st.sampled_from(FAMILIES), st.floats(1e-6, 0.5), st.floats(1.0, 2.0))
@settings(max_examples=100)
def test_Q_monotone(dist, s, factor):
    assert wegner_Q(dist, s * factor) >= wegner_Q(dist, s) - 1e-15


@pytest.mark.parametrize("dist", FAMILIES)
@pytest.mark.parametrize("m", [1, 2, 4, moment_order_md(1), moment_order_md(2)])
def test_Q_moment_bound_sweep(dist, m):
    for s in np.logspace(-4, 0, 25):
        lhs = wegner_Q(dist, float(s), m=m)
        rhs = (1.0 + dist.M) ** m * wegner_Q(dist, float(s))
        assert lhs <= rhs * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# box maximum


def test_q_lambda_identical_sites():
    assert q_lambda([UNIFORM] * 5, 0.1) == wegner_Q(UNIFORM, 0.1)


def test_q_lambda_two_uniforms():
    mix = [UNIFORM, SiteDistributionSpec("uniform", M=2.0)]
    assert q_lambda(mix, 0.1) == pytest.approx(0.1, abs=1e-15)


def test_q_lambda_mixed_families():
    mix = [UNIFORM, POWER_HALF]
    assert q_lambda(mix, 0.01) == pytest.approx(8.0 * 0.1, abs=1e-12)


def test_q_lambda_empty_rejected():
    with pytest.raises(ValueError):
        q_lambda([], 0.1)


# ---------------------------------------------------------------------------
# Hoelder constants


def test_holder_uniform():
    est = holder_constant(UNIFORM, 1.0)
    assert est.is_holder
    assert est.constant == pytest.approx(1.0, rel=1e-9)


def test_holder_power_half():
    est = holder_constant(POWER_HALF, 0.5)
    assert est.is_holder
    assert est.constant == pytest.approx(8.0, rel=1e-9)
    diverging = holder_constant(POWER_HALF, 1.0)
    assert not diverging.is_holder
    assert math.isinf(diverging.constant)


@pytest.mark.parametrize("dist", [UNIFORM, TRIANGULAR,
                                  SiteDistributionSpec("power", alpha=2.0)])
def test_holder_flag_matches_bounded_density(dist):
    assert holder_constant(dist, 1.0).is_holder


# ---------------------------------------------------------------------------
# moment order


@pytest.mark.parametrize("d,expected", [(1, 4), (2, 8), (3, 12)])
def test_moment_order(d, expected):
    assert moment_order_md(d) == expected
    # the defining closed form
    assert 2.0 ** (2.0 + math.log2(d)) == pytest.approx(expected, abs=1e-9)


def test_profile_for():
    p = profile_for(UNIFORM, alpha=1.0)
    assert p.bounded_density and p.density_sup == 1.0
    assert p.holder_const == pytest.approx(1.0, rel=1e-9)
    q = profile_for(POWER_HALF)
    assert not q.bounded_density and q.density_sup is None
