"""Eigenvalue machinery: dense spectra, inertia-based counting, windowed
weighted traces, and dense functional calculus.

Interval convention: energy windows are half-open on the left, (a, b], so that
the count in a window always equals count_leq(b) - count_leq(a).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from .errors import CapacityError, UsageError
from .lattice import GridFunction

DENSE_THRESHOLD = 4096

# fraction of the spectral width below which discrete eigenvalues are trusted
# as approximations of the continuum operator
VALIDITY_FRACTION = 0.05

Operator = Union[np.ndarray, sp.spmatrix]


@dataclass(frozen=True)
class SpectralWindowResult:
    window: tuple[float, float]
    eigenvalues: np.ndarray
    weighted_trace: Optional[float] = None
    validity_warning: bool = False

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)


def _as_sparse(H: Operator) -> sp.csr_matrix:
    return H.tocsr() if sp.issparse(H) else sp.csr_matrix(np.asarray(H, dtype=float))


def gershgorin_interval(H: Operator) -> tuple[float, float]:
    """Enclosing interval for the spectrum from Gershgorin discs."""
    A = _as_sparse(H)
    diag = A.diagonal()
    radii = np.abs(A).sum(axis=1).A1 - np.abs(diag)
    return float((diag - radii).min()), float((diag + radii).max())


def spectral_width(H: Operator) -> float:
    lo, hi = gershgorin_interval(H)
    return max(hi - lo, np.finfo(float).tiny)


def full_spectrum(H: Operator, eigenvectors: bool = False,
                  dense_threshold: int = DENSE_THRESHOLD):
    """All eigenvalues (ascending), dense path only.

    Raises CapacityError above the dense threshold; use count_leq /
    window_trace for larger operators.
    """
    n = H.shape[0]
    if n > dense_threshold:
        raise CapacityError(
            f"dimension {n} exceeds the dense threshold {dense_threshold}; "
            "use count_leq or window_trace instead")
    dense = H.toarray() if sp.issparse(H) else np.asarray(H, dtype=float)
    if eigenvectors:
        return np.linalg.eigh(dense)
    return np.linalg.eigvalsh(dense)


def count_leq(H: Operator, E: float) -> int:
    """Number of eigenvalues <= E, via the inertia of a symmetric factorization.

    H - E*I is factored as L D L^T (unpivoted sparse LU in symmetric mode); by
    Sylvester's law of inertia the number of negative diagonal entries of D is
    the eigenvalue count below the shift.  A shift landing (numerically) on an
    eigenvalue is retried with E perturbed upward by 1e-12 times the spectral
    range, three times, before giving up.
    """
    A = sp.csc_matrix(_as_sparse(H), dtype=float)
    n = A.shape[0]
    width = spectral_width(A)
    shift = float(E)
    last_err: Exception | None = None
    for attempt in range(4):
        try:
            lu = splu(A - shift * sp.identity(n, format="csc"),
                      permc_spec="NATURAL", diag_pivot_thresh=0.0,
                      options=dict(SymmetricMode=True))
        except RuntimeError as err:  # exactly singular factor
            last_err = err
            shift += 1e-12 * width
            continue
        d = lu.U.diagonal()
        if (not np.all(np.isfinite(d))
                or np.min(np.abs(d)) < 1e-14 * width
                or not np.array_equal(lu.perm_r, np.arange(n))):
            last_err = RuntimeError("near-singular or pivoted factorization")
            shift += 1e-12 * width
            continue
        return int(np.sum(d < 0.0))
    raise UsageError(
        f"factorization failed near E = {E} after 3 perturbed retries: {last_err}")


def _weight_values(w, n: int) -> Optional[np.ndarray]:
    if w is None:
        return None
    if isinstance(w, GridFunction):
        w = w.values
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != n:
        raise UsageError("weight length does not match the operator dimension")
    return w


def window_trace(H: Operator, interval: tuple[float, float], w=None,
                 dense_threshold: int = DENSE_THRESHOLD,
                 validity_fraction: float = VALIDITY_FRACTION) -> SpectralWindowResult:
    """Eigenvalues in the half-open window (a, b] and the weighted trace
    sum_{lambda in I} sum_x |psi(x)|^2 w(x) with l2-normalized eigenvectors.

    With w omitted the weighted trace is the plain eigenvalue count.  Windows
    reaching above validity_fraction of the spectral width are flagged, not
    rejected.
    """
    a, b = float(interval[0]), float(interval[1])
    if b < a:
        raise UsageError("empty window: need a <= b")
    n = H.shape[0]
    wv = _weight_values(w, n)
    warn = b > validity_fraction * spectral_width(H)
    if n <= dense_threshold:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H, dtype=float)
        evals, evecs = np.linalg.eigh(dense)
        inside = (evals > a) & (evals <= b)
        lam = evals[inside]
        vecs = evecs[:, inside]
    else:
        lam, vecs = _window_pairs_sparse(_as_sparse(H), a, b, n)
    if wv is None:
        trace = float(lam.size)
    else:
        trace = float(np.sum((vecs ** 2) * wv[:, None]))
    return SpectralWindowResult(window=(a, b), eigenvalues=lam,
                                weighted_trace=trace, validity_warning=warn)


def _window_pairs_sparse(H: sp.csr_matrix, a: float, b: float, n: int):
    """Shift-invert eigenpairs in (a, b], terminated by an inertia certificate."""
    needed = count_leq(H, b) - count_leq(H, a)
    if needed == 0:
        return np.empty(0), np.empty((n, 0))
    sigma = 0.5 * (a + b)
    k = needed
    while True:
        if k >= n - 1:
            raise CapacityError("window covers nearly the whole spectrum; "
                                "no sparse path available")
        evals, evecs = eigsh(H, k=k, sigma=sigma, which="LM")
        inside = (evals > a) & (evals <= b)
        if int(inside.sum()) >= needed:
            order = np.argsort(evals[inside])
            return evals[inside][order], evecs[:, inside][:, order]
        k = min(2 * k + 2, n - 1)


def matrix_function(H: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """f(H) for dense symmetric H via spectral decomposition."""
    H = np.asarray(H, dtype=float)
    evals, evecs = np.linalg.eigh(H)
    out = (evecs * f(evals)) @ evecs.T
    return 0.5 * (out + out.T)


def _check_nonneg(values: np.ndarray, name: str) -> None:
    if np.any(values < -1e-14 * max(1.0, np.max(np.abs(values), initial=0.0))):
        raise UsageError(f"{name} must be nonnegative")


def lemma31_gap_trace(H0: np.ndarray, W: np.ndarray, E0: float,
                      f: Callable[[np.ndarray], np.ndarray],
                      h: Callable[[np.ndarray], np.ndarray]) -> float:
    """tr f(H0+W) W h(H0) for f supported in (-inf, E0], h in [E0, inf).

    The sign of this trace is the quantity under test; support violations of
    f or h are usage errors, not part of the experiment.
    """
    H0 = np.asarray(H0, dtype=float)
    W = np.asarray(W, dtype=float)
    H = H0 + W
    evals_h = np.linalg.eigvalsh(H)
    evals_h0 = np.linalg.eigvalsh(H0)
    fv, hv = f(evals_h), h(evals_h0)
    _check_nonneg(np.asarray(fv), "f")
    _check_nonneg(np.asarray(hv), "h")
    if np.any(np.abs(np.asarray(fv)[evals_h > E0]) > 0.0):
        raise UsageError("f must vanish above E0")
    if np.any(np.abs(np.asarray(hv)[evals_h0 < E0]) > 0.0):
        raise UsageError("h must vanish below E0")
    F = matrix_function(H, f)
    Hh = matrix_function(H0, h)
    return float(np.trace(F @ W @ Hh))


def lemma31_pair(H0: np.ndarray, W: np.ndarray, E0: float,
                 f: Callable[[np.ndarray], np.ndarray],
                 g: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """The pair (tr f(H)W, tr f(H)W g(H0)) for the companion inequality,
    where g squeezes between the step at E0 and the constant 1."""
    H0 = np.asarray(H0, dtype=float)
    W = np.asarray(W, dtype=float)
    H = H0 + W
    evals_h = np.linalg.eigvalsh(H)
    evals_h0 = np.linalg.eigvalsh(H0)
    fv = np.asarray(f(evals_h))
    gv = np.asarray(g(evals_h0))
    _check_nonneg(fv, "f")
    if np.any(np.abs(fv[evals_h > E0]) > 0.0):
        raise UsageError("f must vanish above E0")
    if np.any(gv < -1e-12) or np.any(gv > 1.0 + 1e-12):
        raise UsageError("g must take values in [0, 1]")
    if np.any(np.abs(gv[evals_h0 <= E0] - 1.0) > 1e-12):
        raise UsageError("g must equal 1 at and below E0")
    F = matrix_function(H, f)
    G = matrix_function(H0, g)
    return float(np.trace(F @ W)), float(np.trace(F @ W @ G))
