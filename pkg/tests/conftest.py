import numpy as np
import pytest

from andersonlab import (BoxSpec, ModelSpec, PeriodicPotential,
                         SingleSitePotential, SiteDistributionSpec,
                         normalize_model)


def make_model(dim=1, family="uniform", M=1.0, alpha=1.0, periodic=None,
               site=None, spine=None, overrides=None):
    return ModelSpec(
        dim=dim,
        periodic=periodic or PeriodicPotential.zero(),
        site=site or SingleSitePotential(),
        default_dist=SiteDistributionSpec(family=family, M=M, alpha=alpha),
        overrides=overrides or {},
        spine=spine,
    )


def normalized(model, box):
    return normalize_model(model, box)


@pytest.fixture
def box_8_2():
    return BoxSpec(side=8, grid_per_unit=2, dim=1)


@pytest.fixture
def uniform_model_8_2(box_8_2):
    return normalize_model(make_model(), box_8_2)


# acceptance verdict lines, echoed after the test summary (one per criterion)
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in VERDICTS:
            terminalreporter.write_line(line)


def circulant_laplacian_eigs(points_per_axis, h, dim):
    """Closed-form spectrum of the periodic stencil Laplacian."""
    k = np.arange(points_per_axis)
    one_d = 2.0 / h ** 2 * (1.0 - np.cos(2.0 * np.pi * k / points_per_axis))
    eigs = one_d
    for _ in range(dim - 1):
        eigs = (eigs[:, None] + one_d[None, :]).reshape(-1)
    return np.sort(eigs)
