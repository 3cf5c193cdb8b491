"""Finite-volume discretization on the torus.

Builds the periodic finite-difference Laplacian, wraps single-site potentials
around the torus, and assembles the full disordered Hamiltonian as a real
symmetric sparse matrix.  Grid convention: the box of side L centered at the
lattice point j0 carries (n*L)^d points x_i = j0 - L/2 + i/n per axis, spacing
h = 1/n, and the integer sites are the L^d lattice points inside the box.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import IO, Iterator, TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DomainError, UsageError

if TYPE_CHECKING:
    from .model import DisorderSample, ModelSpec, Site


@dataclass(frozen=True)
class BoxSpec:
    """Torus box of even integer side L with n grid points per unit length."""

    side: int
    grid_per_unit: int = 1
    dim: int = 1
    center: tuple[int, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dimension must be >= 1")
        if self.side < 2 or self.side % 2 != 0:
            raise ConfigurationError("box side must be an even integer >= 2")
        if self.grid_per_unit < 1:
            raise ConfigurationError("grid_per_unit must be >= 1")
        center = self.center if self.center else (0,) * self.dim
        if len(center) != self.dim:
            raise ConfigurationError("box center has the wrong dimension")
        object.__setattr__(self, "center", tuple(int(c) for c in center))

    @property
    def h(self) -> float:
        return 1.0 / self.grid_per_unit

    @property
    def points_per_axis(self) -> int:
        return self.side * self.grid_per_unit

    @property
    def total_points(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def num_sites(self) -> int:
        return self.side ** self.dim

    def lower_corner(self) -> tuple[int, ...]:
        return tuple(c - self.side // 2 for c in self.center)

    def sites(self) -> Iterator[tuple[int, ...]]:
        """Integer lattice points of the half-open box, row-major order."""
        lo = self.lower_corner()
        ranges = [range(c, c + self.side) for c in lo]
        return itertools.product(*ranges)

    def contains_site(self, j) -> bool:
        lo = self.lower_corner()
        return all(c <= int(a) < c + self.side for a, c in zip(j, lo))

    def grid_axis(self, axis: int) -> np.ndarray:
        lo = self.lower_corner()[axis]
        return lo + np.arange(self.points_per_axis) / self.grid_per_unit


@dataclass(frozen=True)
class GridFunction:
    """Real-valued function on the box grid, stored flat in row-major order."""

    box: BoxSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size != self.box.total_points:
            raise ConfigurationError("grid function length does not match the box")
        object.__setattr__(self, "values", vals)

    def reshape(self) -> np.ndarray:
        return self.values.reshape((self.box.points_per_axis,) * self.box.dim)


def validate_box_for_model(spec: "ModelSpec", box: BoxSpec,
                           spine_experiment: bool = False) -> None:
    """Check divisibility and support constraints tying a box to a model."""
    if box.dim != spec.dim:
        raise ConfigurationError("box and model dimensions differ")
    q = spec.periodic.period
    if box.side % (2 * q) != 0:
        raise ConfigurationError(f"box side {box.side} must be a multiple of 2q = {2 * q}")
    if box.side <= spec.site.delta_plus:
        raise ConfigurationError(
            f"box side {box.side} must exceed the bump support delta_plus = "
            f"{spec.site.delta_plus}")
    if spine_experiment:
        if spec.spine is None:
            raise ConfigurationError("spine experiment requested on a model without a spine")
        kq = 2 * q * spec.spine.K
        if box.side % kq != 0:
            raise ConfigurationError(
                f"spine experiments need 2qK | L; got L = {box.side}, 2qK = {kq}")


# ---------------------------------------------------------------------------
# Laplacian


def laplacian_grid(points_per_axis: int, h: float, dim: int) -> sp.csr_matrix:
    """Periodic (2d+1)-point stencil Laplacian on a raw grid, any size >= 2."""
    m = points_per_axis
    inv_h2 = 1.0 / (h * h)
    rows = np.arange(m)
    one_d = sp.coo_matrix(
        (np.concatenate([np.full(m, 2.0 * inv_h2),
                         np.full(m, -inv_h2), np.full(m, -inv_h2)]),
         (np.concatenate([rows, rows, rows]),
          np.concatenate([rows, (rows + 1) % m, (rows - 1) % m]))),
        shape=(m, m)).tocsr()
    eye = sp.identity(m, format="csr")
    total = None
    for axis in range(dim):
        term = None
        for a in range(dim):
            factor = one_d if a == axis else eye
            term = factor if term is None else sp.kron(term, factor, format="csr")
        total = term if total is None else total + term
    return total.tocsr()


def build_laplacian(box: BoxSpec) -> sp.csr_matrix:
    """Positive semidefinite periodic Laplacian; kernel is the constant vector."""
    return laplacian_grid(box.points_per_axis, box.h, box.dim)


def build_free_operator(spec: "ModelSpec", box: BoxSpec) -> sp.csr_matrix:
    """Laplacian plus periodic background (including the recorded shift)."""
    validate_box_for_model(spec, box)
    lap = build_laplacian(box)
    vper = periodic_grid(spec, box)
    return (lap + sp.diags(vper.values + spec.periodic.shift)).tocsr()


def periodic_grid(spec: "ModelSpec", box: BoxSpec) -> GridFunction:
    """Periodic background sampled on the full box grid (shift not included)."""
    cell = spec.periodic.cell_values(box.grid_per_unit, box.dim)
    reps = box.side // spec.periodic.period
    full = np.tile(cell, (reps,) * box.dim)
    return GridFunction(box=box, values=full.reshape(-1))


# ---------------------------------------------------------------------------
# single-site weights on the torus

def _profile_patch(site_pot, n: int, dim: int):
    """Offsets (per axis, grid units) and bump values on the support patch."""
    half = site_pot.delta_plus / 2.0
    m_lo = math.ceil(-half * n)
    m_hi = math.ceil(half * n)  # exclusive; half-open support
    offsets = np.arange(m_lo, m_hi)
    dx_axes = [offsets / n] * dim
    mesh = np.stack(np.meshgrid(*dx_axes, indexing="ij"), axis=-1)
    return offsets, site_pot.evaluate(mesh)


def _site_grid_position(box: BoxSpec, j) -> tuple[int, ...]:
    lo = box.lower_corner()
    return tuple((int(a) - c) * box.grid_per_unit for a, c in zip(j, lo))


def _scatter_site(values: np.ndarray, box: BoxSpec, pos, offsets: np.ndarray,
                  patch: np.ndarray, amount: float) -> None:
    m = box.points_per_axis
    idx_axes = [(p + offsets) % m for p in pos]
    values[np.ix_(*idx_axes)] += amount * patch


def site_weight(spec: "ModelSpec", box: BoxSpec, j) -> GridFunction:
    """Single-site bump at site j wrapped around the torus (u_j on the box)."""
    if not box.contains_site(j):
        raise DomainError(f"site {tuple(j)} lies outside the box")
    offsets, patch = _profile_patch(spec.site, box.grid_per_unit, box.dim)
    values = np.zeros((box.points_per_axis,) * box.dim)
    _scatter_site(values, box, _site_grid_position(box, j), offsets, patch, 1.0)
    return GridFunction(box=box, values=values.reshape(-1))


def indicator_weight(box: BoxSpec, j) -> GridFunction:
    """Characteristic function of the half-open unit cell at site j."""
    from .model import SingleSitePotential
    if not box.contains_site(j):
        raise DomainError(f"site {tuple(j)} lies outside the box")
    chi = SingleSitePotential(profile="indicator", delta_minus=1.0, delta_plus=1.0)
    offsets, patch = _profile_patch(chi, box.grid_per_unit, box.dim)
    values = np.zeros((box.points_per_axis,) * box.dim)
    _scatter_site(values, box, _site_grid_position(box, j), offsets, patch, 1.0)
    return GridFunction(box=box, values=values.reshape(-1))


def disorder_grid(spec: "ModelSpec", sample: "DisorderSample") -> GridFunction:
    """Random potential sum_j omega_j u_j evaluated on the box grid."""
    box = sample.box
    offsets, patch = _profile_patch(spec.site, box.grid_per_unit, box.dim)
    values = np.zeros((box.points_per_axis,) * box.dim)
    for j in box.sites():
        _scatter_site(values, box, _site_grid_position(box, j), offsets, patch,
                      sample.values[j])
    return GridFunction(box=box, values=values.reshape(-1))


def site_traces(spec: "ModelSpec", box: BoxSpec, density: np.ndarray) -> np.ndarray:
    """Grid sums sum_x density(x) u_j(x) for every site j, in row-major site order."""
    offsets, patch = _profile_patch(spec.site, box.grid_per_unit, box.dim)
    dens = np.asarray(density, dtype=float).reshape((box.points_per_axis,) * box.dim)
    m = box.points_per_axis
    out = np.empty(box.num_sites)
    for k, j in enumerate(box.sites()):
        pos = _site_grid_position(box, j)
        idx_axes = [(p + offsets) % m for p in pos]
        out[k] = float(np.sum(dens[np.ix_(*idx_axes)] * patch))
    return out


def assemble_hamiltonian(spec: "ModelSpec", sample: "DisorderSample") -> sp.csr_matrix:
    """Full finite-volume Hamiltonian for one disorder realization."""
    if not spec.normalized:
        raise UsageError("model must be normalized before assembly")
    box = sample.box
    validate_box_for_model(spec, box)
    lap = build_laplacian(box)
    vper = periodic_grid(spec, box).values + spec.periodic.shift
    vdis = disorder_grid(spec, sample).values
    return (lap + sp.diags(vper + vdis)).tocsr()


# ---------------------------------------------------------------------------
# geometry report


@dataclass(frozen=True)
class GeometryReport:
    partition_ok: bool
    covering_min: float
    u_plus: float


def geometry_checks(spec: "ModelSpec", box: BoxSpec) -> GeometryReport:
    """Partition-of-unity and covering diagnostics for the wrapped bumps.

    partition_ok: the unit-cell indicators tile the grid exactly.
    covering_min: min over the grid of sum_j u_j (>= u_minus required when
    delta_minus >= 1).  u_plus: max over the grid of sum_j u_j.
    """
    validate_box_for_model(spec, box)
    from .model import SingleSitePotential
    chi = SingleSitePotential(profile="indicator", delta_minus=1.0, delta_plus=1.0)
    m = box.points_per_axis
    chi_sum = np.zeros((m,) * box.dim)
    u_sum = np.zeros((m,) * box.dim)
    chi_off, chi_patch = _profile_patch(chi, box.grid_per_unit, box.dim)
    u_off, u_patch = _profile_patch(spec.site, box.grid_per_unit, box.dim)
    for j in box.sites():
        pos = _site_grid_position(box, j)
        _scatter_site(chi_sum, box, pos, chi_off, chi_patch, 1.0)
        _scatter_site(u_sum, box, pos, u_off, u_patch, 1.0)
    return GeometryReport(
        partition_ok=bool(np.all(chi_sum == 1.0)),
        covering_min=float(u_sum.min()),
        u_plus=float(u_sum.max()),
    )


# ---------------------------------------------------------------------------
# operator dump


def dump_triplets(op: sp.spmatrix, stream: IO[str]) -> None:
    """Write the operator as plain-text triplets: one "row col value" per line.

    Rows are emitted in row-major order; values use repr-faithful formatting so
    the dump round-trips bit for bit.
    """
    coo = sp.coo_matrix(op)
    order = np.lexsort((coo.col, coo.row))
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        stream.write(f"{int(r)} {int(c)} {float(v)!r}\n")
