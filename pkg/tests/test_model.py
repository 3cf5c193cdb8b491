import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andersonlab import (BoxSpec, ConfigurationError, PeriodicPotential,
                         SingleSitePotential, SiteDistributionSpec, SpineSpec,
                         UsageError, normalize_model, sample_disorder,
                         subspine_for)
from andersonlab.model import site_stream_seed

from conftest import make_model


# ---------------------------------------------------------------------------
# single-site potential


def test_site_potential_validation():
    with pytest.raises(ConfigurationError):
        SingleSitePotential(delta_minus=2.0, delta_plus=1.0)
    with pytest.raises(ConfigurationError):
        SingleSitePotential(u_minus=0.0)
    with pytest.raises(ConfigurationError):
        SingleSitePotential(profile="gaussian")


@given(st.sampled_from(["indicator", "plateau_bump"]),
       st.floats(0.5, 2.0), st.floats(0.0, 2.0),
       st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=3))
@settings(max_examples=200)
def test_site_potential_support_and_levels(profile, dminus, extra, x):
    dplus = dminus + extra
    if profile == "plateau_bump" and extra == 0.0:
        profile = "indicator"
    u = SingleSitePotential(profile=profile, delta_minus=dminus,
                            delta_plus=dplus, u_minus=0.5)
    val = float(u.evaluate(np.array(x)))
    assert 0.0 <= val <= 1.0
    if max(abs(c) for c in x) < dminus / 2.0:
        assert val >= 0.5
    if max(abs(c) for c in x) > dplus / 2.0:
        assert val == 0.0


def test_site_potential_sup_is_one():
    u = SingleSitePotential(profile="plateau_bump", delta_minus=1.0, delta_plus=2.0)
    assert float(u.evaluate(np.zeros(2))) == 1.0


# ---------------------------------------------------------------------------
# distributions


@pytest.mark.parametrize("dist", [
    SiteDistributionSpec("uniform", M=1.0),
    SiteDistributionSpec("uniform", M=2.5),
    SiteDistributionSpec("power", M=1.0, alpha=0.5),
    SiteDistributionSpec("power", M=1.0, alpha=2.0),
    SiteDistributionSpec("triangular", M=1.0),
])
def test_ppf_inverts_cdf(dist):
    u = np.linspace(1e-9, 1.0 - 1e-9, 1001)
    t = dist.ppf(u)
    assert np.all(t >= 0.0) and np.all(t <= dist.M)
    assert np.allclose(dist.cdf(t), u, atol=1e-9)


def test_distribution_validation():
    with pytest.raises(ConfigurationError):
        SiteDistributionSpec("gaussian")
    with pytest.raises(ConfigurationError):
        SiteDistributionSpec("uniform", M=0.0)
    with pytest.raises(ConfigurationError):
        SiteDistributionSpec("power", alpha=-1.0)


# ---------------------------------------------------------------------------
# normalization


def test_normalize_zero_background():
    box = BoxSpec(side=8, grid_per_unit=2, dim=1)
    spec = normalize_model(make_model(), box)
    assert spec.normalized
    assert spec.periodic.shift == pytest.approx(0.0, abs=1e-12)


def test_normalize_constant_background():
    box = BoxSpec(side=8, grid_per_unit=2, dim=1)
    spec = normalize_model(
        make_model(periodic=PeriodicPotential.constant_field(3.5)), box)
    assert spec.periodic.shift == pytest.approx(-3.5, abs=1e-12)


def test_normalize_cosine_background_matches_dense_oracle():
    import scipy.sparse as sp
    from andersonlab.lattice import build_laplacian, periodic_grid

    box = BoxSpec(side=8, grid_per_unit=16, dim=1)
    periodic = PeriodicPotential.from_function(
        lambda x: np.cos(2.0 * np.pi * x[..., 0]), 1, 16, 1)
    spec = normalize_model(make_model(periodic=periodic), box)
    lap = build_laplacian(box)
    vper = periodic_grid(spec, box).values
    lam_min = np.linalg.eigvalsh((lap + sp.diags(vper)).toarray())[0]
    assert spec.periodic.shift == pytest.approx(-lam_min, abs=1e-10)
    # re-diagonalizing the shifted operator puts the bottom at 0
    h0 = (lap + sp.diags(vper + spec.periodic.shift)).toarray()
    evals = np.linalg.eigvalsh(h0)
    width = evals[-1] - evals[0]
    assert abs(evals[0]) <= 1e-10 * width


def test_normalize_rejects_nondivisible_period():
    box = BoxSpec(side=6, grid_per_unit=2, dim=1)
    spec = make_model(periodic=PeriodicPotential.zero(period=2))
    with pytest.raises(ConfigurationError):
        normalize_model(spec, box)  # 2q = 4 does not divide 6


# ---------------------------------------------------------------------------
# disorder sampling


def test_sample_requires_normalized():
    box = BoxSpec(side=4, grid_per_unit=1, dim=1)
    with pytest.raises(UsageError):
        sample_disorder(make_model(), box, 0, 0)


def test_sample_support_many_trials():
    box = BoxSpec(side=10, grid_per_unit=1, dim=1)
    for family, M, alpha in [("uniform", 1.0, 1.0), ("power", 2.0, 0.5),
                             ("triangular", 1.5, 1.0)]:
        spec = normalize_model(make_model(family=family, M=M, alpha=alpha), box)
        rng = np.random.default_rng(0)
        for _ in range(350):  # ~10^4 site draws across the three families
            s = sample_disorder(spec, box, int(rng.integers(2 ** 63)), 0)
            vals = np.array(list(s.values.values()))
            assert np.all(vals >= 0.0) and np.all(vals <= M)


def test_sample_determinism(uniform_model_8_2, box_8_2):
    a = sample_disorder(uniform_model_8_2, box_8_2, 1234, 7)
    b = sample_disorder(uniform_model_8_2, box_8_2, 1234, 7)
    assert a.values == b.values
    assert a.seed_path == (1234, 7)


def test_sample_order_independence(uniform_model_8_2, box_8_2):
    spec, box = uniform_model_8_2, box_8_2
    sample = sample_disorder(spec, box, 99, 3)
    sites = list(box.sites())
    rng = np.random.default_rng(5)
    for j in rng.permutation(len(sites)):
        site = sites[j]
        stream = np.random.Generator(np.random.PCG64(
            site_stream_seed(99, 3, site)))
        expected = float(spec.distribution_at(site).ppf(stream.random()))
        assert sample.values[site] == expected


def test_sample_depends_on_index_and_seed(uniform_model_8_2, box_8_2):
    base = sample_disorder(uniform_model_8_2, box_8_2, 1, 0)
    assert sample_disorder(uniform_model_8_2, box_8_2, 1, 1).values != base.values
    assert sample_disorder(uniform_model_8_2, box_8_2, 2, 0).values != base.values


def test_power_half_empirical_cdf():
    # 10^5 draws through the sampling pipeline; CDF at s should be sqrt(s)
    box = BoxSpec(side=100, grid_per_unit=1, dim=1)
    spec = normalize_model(make_model(family="power", M=1.0, alpha=0.5), box)
    draws = []
    for i in range(1000):
        draws.extend(sample_disorder(spec, box, 2024, i).values.values())
    draws = np.asarray(draws)
    n = draws.size
    assert n == 100_000
    for s in (0.04, 0.25, 0.64):
        p = math.sqrt(s)
        emp = float(np.mean(draws <= s))
        tol = 3.0 * math.sqrt(p * (1.0 - p) / n)
        assert abs(emp - p) <= tol


# ---------------------------------------------------------------------------
# spine / subspine


def test_subspine_parity_example():
    spine = SpineSpec(j0=(0,), K=1, mu_gamma=SiteDistributionSpec("uniform"))
    sub = subspine_for(spine, (0,))
    assert sub.K == 2
    assert not sub.contains((0,))
    assert all(spine.contains((sub.j0[0] + 2 * k,)) for k in range(-5, 5))


def test_subspine_residue_example():
    spine = SpineSpec(j0=(0,), K=2, mu_gamma=SiteDistributionSpec("uniform"))
    sub = subspine_for(spine, (4,))
    assert sub.K == 4
    assert not sub.contains((4,))


def test_subspine_2d_example():
    spine = SpineSpec(j0=(0, 0), K=3, mu_gamma=SiteDistributionSpec("uniform"))
    sub = subspine_for(spine, (3, 0))
    assert sub.K == 6
    assert not sub.contains((3, 0))
    # exhaustive membership check on a window: sub is a subset of the spine
    for j in itertools.product(range(-12, 13), repeat=2):
        if sub.contains(j):
            assert spine.contains(j)


@pytest.mark.parametrize("dim", [1, 2])
def test_subspine_exhaustive_window(dim):
    spine = SpineSpec(j0=(1,) * dim, K=2,
                      mu_gamma=SiteDistributionSpec("uniform"))
    for j in itertools.product(range(-10, 10), repeat=dim):
        sub = subspine_for(spine, j)
        assert not sub.contains(j)
        for k in itertools.product(range(-10, 10), repeat=dim):
            if sub.contains(k):
                assert spine.contains(k)


# ---------------------------------------------------------------------------
# effective distributions


def test_spine_wins_over_overrides():
    mu = SiteDistributionSpec("triangular", M=2.0)
    spine = SpineSpec(j0=(0,), K=2, mu_gamma=mu)
    spec = make_model(spine=spine,
                      overrides={(0,): SiteDistributionSpec("uniform", M=5.0),
                                 (1,): SiteDistributionSpec("uniform", M=3.0)})
    assert spec.distribution_at((0,)) == mu          # spine beats the override
    assert spec.distribution_at((2,)) == mu          # spine membership
    assert spec.distribution_at((1,)).M == 3.0       # plain override
    assert spec.distribution_at((3,)) == spec.default_dist


def test_coupling_max_records_global_M():
    spine = SpineSpec(j0=(0,), K=2,
                      mu_gamma=SiteDistributionSpec("uniform", M=4.0))
    spec = make_model(M=1.0, spine=spine,
                      overrides={(1,): SiteDistributionSpec("uniform", M=2.0)})
    assert spec.coupling_max == 4.0
