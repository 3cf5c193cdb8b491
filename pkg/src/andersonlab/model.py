"""Operator family definitions and reproducible disorder sampling.

The random operator is -Laplacian + periodic background + sum_j omega_j u(. - j)
on a torus, with independent (not necessarily identically distributed) couplings
omega_j.  This module holds the specification types (single-site bump, periodic
background, per-site coupling distributions, optional sublattice sharing one
distribution) and the two stateful-looking but pure operations: spectral-bottom
normalization and counter-based disorder sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, UsageError

Site = tuple[int, ...]


# ---------------------------------------------------------------------------
# single-site potential


@dataclass(frozen=True)
class SingleSitePotential:
    """Compactly supported bump u with sup height exactly 1.

    profile 'indicator' is the characteristic function of the half-open cube of
    side delta_plus; 'plateau_bump' is 1 on the inner cube of side delta_minus
    and ramps linearly to 0 at the edge of the outer cube of side delta_plus.
    u_minus certifies the lower level on the inner cube.
    """

    profile: str = "indicator"  # 'indicator' | 'plateau_bump'
    delta_minus: float = 1.0
    delta_plus: float = 1.0
    u_minus: float = 1.0

    def __post_init__(self):
        if self.profile not in ("indicator", "plateau_bump"):
            raise ConfigurationError(f"unknown profile {self.profile!r}")
        if not (0.0 < self.delta_minus <= self.delta_plus):
            raise ConfigurationError("need 0 < delta_minus <= delta_plus")
        if not (0.0 < self.u_minus <= 1.0):
            raise ConfigurationError("need u_minus in (0, 1]")
        if self.profile == "plateau_bump" and self.delta_minus == self.delta_plus:
            object.__setattr__(self, "profile", "indicator")

    def evaluate(self, dx: np.ndarray) -> np.ndarray:
        """Evaluate u at displacements dx (shape (..., d)) from the site.

        Cubes are half-open per axis, [-delta/2, delta/2), so that side-1
        indicators tile the torus exactly.
        """
        dx = np.asarray(dx, dtype=float)
        if self.profile == "indicator":
            half = self.delta_plus / 2.0
            inside = np.all((dx >= -half) & (dx < half), axis=-1)
            return inside.astype(float)
        t = np.max(np.abs(dx), axis=-1)
        ramp = (self.delta_plus / 2.0 - t) / ((self.delta_plus - self.delta_minus) / 2.0)
        return np.clip(ramp, 0.0, 1.0)


# ---------------------------------------------------------------------------
# periodic background


@dataclass(frozen=True)
class PeriodicPotential:
    """Bounded qZ^d-periodic background potential, sampled on one period cell.

    `values` holds the samples on the grid of one period cell at resolution
    `grid_per_unit` points per unit length (None means the constant 0 field,
    possibly offset by `constant`).  `shift` is the normalization constant
    added so the discretized free operator has spectral bottom 0; it is set by
    :func:`normalize_model` and is 0 for a freshly built potential.
    """

    period: int = 1
    values: Optional[np.ndarray] = None
    grid_per_unit: Optional[int] = None
    constant: float = 0.0
    shift: float = 0.0

    def __post_init__(self):
        if self.period < 1:
            raise ConfigurationError("period must be a positive integer")
        if (self.values is None) != (self.grid_per_unit is None):
            raise ConfigurationError("values and grid_per_unit go together")

    @staticmethod
    def zero(period: int = 1) -> "PeriodicPotential":
        return PeriodicPotential(period=period)

    @staticmethod
    def constant_field(c: float, period: int = 1) -> "PeriodicPotential":
        return PeriodicPotential(period=period, constant=c)

    @staticmethod
    def from_function(f: Callable[[np.ndarray], np.ndarray], period: int,
                      grid_per_unit: int, dim: int) -> "PeriodicPotential":
        """Sample f on the grid of one period cell (f takes points of shape (..., d))."""
        npts = period * grid_per_unit
        axes = [np.arange(npts) / grid_per_unit for _ in range(dim)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.asarray(f(mesh), dtype=float)
        if vals.shape != (npts,) * dim:
            raise ConfigurationError("periodic sample grid has the wrong shape")
        return PeriodicPotential(period=period, values=vals, grid_per_unit=grid_per_unit)

    def cell_values(self, grid_per_unit: int, dim: int) -> np.ndarray:
        """Values on one period cell at the box resolution (without the shift)."""
        npts = self.period * grid_per_unit
        if self.values is None:
            return np.full((npts,) * dim, self.constant)
        if self.grid_per_unit != grid_per_unit or self.values.ndim != dim:
            raise ConfigurationError(
                "periodic potential sampled at resolution "
                f"{self.grid_per_unit}, box uses {grid_per_unit}")
        return self.values + self.constant


# ---------------------------------------------------------------------------
# coupling distributions

_FAMILIES = ("uniform", "power", "triangular")


@dataclass(frozen=True)
class SiteDistributionSpec:
    """Atom-free coupling distribution on [0, M].

    uniform     density 1/M
    power       density alpha t^(alpha-1) / M^alpha (unbounded at 0 for alpha < 1)
    triangular  symmetric triangle with mode M/2, peak density 2/M
    """

    family: str
    M: float = 1.0
    alpha: float = 1.0  # only used by 'power'

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.M <= 0:
            raise ConfigurationError("support endpoint M must be positive")
        if self.family == "power" and self.alpha <= 0:
            raise ConfigurationError("power exponent alpha must be positive")

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.M)
        x = t / self.M
        if self.family == "uniform":
            return x
        if self.family == "power":
            return x ** self.alpha
        return np.where(x <= 0.5, 2.0 * x * x, 1.0 - 2.0 * (1.0 - x) ** 2)

    def ppf(self, u):
        """Inverse CDF; maps one uniform variate to one coupling draw."""
        u = np.asarray(u, dtype=float)
        if self.family == "uniform":
            return self.M * u
        if self.family == "power":
            return self.M * u ** (1.0 / self.alpha)
        lo = self.M * np.sqrt(u / 2.0)
        hi = self.M * (1.0 - np.sqrt((1.0 - u) / 2.0))
        return np.where(u <= 0.5, lo, hi)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.M)
        if self.family == "uniform":
            return np.where(inside, 1.0 / self.M, 0.0)
        if self.family == "power":
            with np.errstate(divide="ignore"):
                rho = self.alpha * t ** (self.alpha - 1.0) / self.M ** self.alpha
            return np.where(inside, rho, 0.0)
        tri = (2.0 / self.M) * (1.0 - np.abs(2.0 * t / self.M - 1.0))
        return np.where(inside, np.maximum(tri, 0.0), 0.0)

    def density_sup(self) -> Optional[float]:
        """sup of the density, or None when the density is unbounded."""
        if self.family == "uniform":
            return 1.0 / self.M
        if self.family == "triangular":
            return 2.0 / self.M
        if self.alpha < 1.0:
            return None
        return self.alpha / self.M  # increasing density, sup at t = M


# ---------------------------------------------------------------------------
# spine


@dataclass(frozen=True)
class SpineSpec:
    """Sublattice j0 + K Z^d on which every coupling shares one distribution."""

    j0: Site
    K: int
    mu_gamma: SiteDistributionSpec

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError("spine order K must be a positive integer")
        object.__setattr__(self, "j0", tuple(int(c) for c in self.j0))

    def contains(self, j: Site) -> bool:
        return all((a - b) % self.K == 0 for a, b in zip(j, self.j0))


def subspine_for(spine: SpineSpec, j: Site) -> SpineSpec:
    """Return a coarser sublattice inside `spine` that avoids the site j.

    The result has order 2K and its sites form a subset of the original
    sublattice; j is never a member.
    """
    j = tuple(int(c) for c in j)
    if len(j) != len(spine.j0):
        raise UsageError("site dimension does not match the spine")
    if not all((a - b) % (2 * spine.K) == 0 for a, b in zip(j, spine.j0)):
        jp = spine.j0
    else:
        # j sits on the doubled lattice through j0: step j0 by K along axis 0
        jp = (spine.j0[0] + spine.K,) + spine.j0[1:]
    return SpineSpec(j0=jp, K=2 * spine.K, mu_gamma=spine.mu_gamma)


# ---------------------------------------------------------------------------
# full model


@dataclass(frozen=True)
class ModelSpec:
    dim: int
    periodic: PeriodicPotential
    site: SingleSitePotential
    default_dist: SiteDistributionSpec
    overrides: dict[Site, SiteDistributionSpec] = field(default_factory=dict)
    spine: Optional[SpineSpec] = None
    normalized: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dimension must be >= 1")
        if self.spine is not None and len(self.spine.j0) != self.dim:
            raise ConfigurationError("spine base point has the wrong dimension")
        object.__setattr__(
            self, "overrides",
            {tuple(int(c) for c in k): v for k, v in self.overrides.items()})

    def distribution_at(self, j: Site) -> SiteDistributionSpec:
        """Effective coupling distribution at site j; the spine wins over overrides."""
        j = tuple(int(c) for c in j)
        if self.spine is not None and self.spine.contains(j):
            return self.spine.mu_gamma
        return self.overrides.get(j, self.default_dist)

    @property
    def coupling_max(self) -> float:
        """Global upper endpoint M over all assigned distributions."""
        ms = [self.default_dist.M]
        ms.extend(d.M for d in self.overrides.values())
        if self.spine is not None:
            ms.append(self.spine.mu_gamma.M)
        return max(ms)


@dataclass(frozen=True)
class DisorderSample:
    """One realization of the couplings on the sites of a box."""

    box: "BoxSpec"  # noqa: F821 - lattice.BoxSpec, avoided at import time
    values: dict[Site, float]
    seed_path: tuple[int, int]  # (master seed, sample index)

    def omega_at(self, j: Site) -> float:
        return self.values[tuple(int(c) for c in j)]


def _zigzag(c: int) -> int:
    # bijection Z -> N for SeedSequence spawn keys
    return 2 * c if c >= 0 else -2 * c - 1


def site_stream_seed(master_seed: int, sample_index: int, j: Site) -> np.random.SeedSequence:
    """Fixed counter-based seed derivation for the coupling at site j.

    The stream is SeedSequence(master_seed, spawn_key=(sample_index, z(j_1),
    ..., z(j_d))) with z the zigzag map 0,-1,1,-2,2,... -> 0,1,2,3,4,...
    It depends only on the master seed, the sample index, and the site
    coordinates, never on iteration order.
    """
    key = (int(sample_index),) + tuple(_zigzag(int(c)) for c in j)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)


def sample_disorder(spec: ModelSpec, box, master_seed: int,
                    sample_index: int) -> DisorderSample:
    """Draw one independent coupling per site of the box, reproducibly."""
    if not spec.normalized:
        raise UsageError("normalize the model before sampling disorder")
    values: dict[Site, float] = {}
    for j in box.sites():
        rng = np.random.Generator(np.random.PCG64(
            site_stream_seed(master_seed, sample_index, j)))
        values[j] = float(spec.distribution_at(j).ppf(rng.random()))
    return DisorderSample(box=box, values=values,
                          seed_path=(int(master_seed), int(sample_index)))


def normalize_model(spec: ModelSpec, ref_box) -> ModelSpec:
    """Set the background shift so the free operator's spectral bottom is 0.

    The smallest eigenvalue of the discretized free operator on `ref_box` is
    computed and subtracted.  The reference side must be a multiple of twice
    the period.
    """
    from .lattice import build_free_operator  # deferred: lattice imports model types

    q = spec.periodic.period
    if ref_box.side % (2 * q) != 0:
        raise ConfigurationError(
            f"reference box side {ref_box.side} is not a multiple of 2q = {2 * q}")
    base = replace(spec.periodic, shift=0.0)
    h0 = build_free_operator(replace(spec, periodic=base, normalized=False), ref_box)
    n = h0.shape[0]
    if n <= 4096:
        lam_min = float(np.linalg.eigvalsh(h0.toarray())[0])
    else:
        from scipy.sparse.linalg import eigsh
        lam_min = float(eigsh(h0, k=1, which="SA", return_eigenvectors=False)[0])
    shifted = replace(base, shift=-lam_min)
    return replace(spec, periodic=shifted, normalized=True)
