"""Monte Carlo spectral experiments and fitting procedures.

Each experiment draws independent disorder realizations, evaluates a spectral
observable per sample, and reports ensemble means with standard errors.  Every
per-sample value depends only on (master seed, sample index), so ensembles are
reproducible bit for bit regardless of worker count or execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Optional, Sequence

import numpy as np

from . import spectral
from .concentration import box_distributions, q_lambda, wegner_Q
from .errors import FitError, UsageError
from .lattice import (BoxSpec, assemble_hamiltonian, geometry_checks,
                      site_traces, site_weight, validate_box_for_model)
from .model import (DisorderSample, ModelSpec, Site, sample_disorder,
                    site_stream_seed)


# ---------------------------------------------------------------------------
# ensemble plumbing


@dataclass(frozen=True)
class EnsembleResult:
    per_sample: np.ndarray
    mean: float
    stderr: float
    samples: int
    seed: int
    config_digest: str = ""

    @staticmethod
    def from_samples(values, seed: int, config_digest: str = "") -> "EnsembleResult":
        values = np.asarray(values, dtype=float).reshape(-1)
        n = values.size
        if n == 0:
            raise UsageError("cannot aggregate an empty ensemble")
        stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return EnsembleResult(per_sample=values, mean=float(values.mean()),
                              stderr=stderr, samples=n, seed=int(seed),
                              config_digest=config_digest)


def run_ensemble(observable, payload, samples: int, workers: int = 1) -> np.ndarray:
    """Evaluate observable(payload, i) for i = 0..samples-1, ordered by index."""
    if samples < 1:
        raise UsageError("sample count must be >= 1")
    fn = partial(observable, payload)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(fn, range(samples), chunksize=max(1, samples // (4 * workers))))
    else:
        rows = [fn(i) for i in range(samples)]
    return np.asarray(rows, dtype=float)


def _window_density(H, interval, dense_threshold):
    """Diagonal of the spectral projection onto the half-open window (a, b]."""
    a, b = interval
    n = H.shape[0]
    if n <= dense_threshold:
        evals, evecs = np.linalg.eigh(H.toarray())
        inside = (evals > a) & (evals <= b)
        return np.sum(evecs[:, inside] ** 2, axis=1)
    lam, vecs = spectral._window_pairs_sparse(H.tocsr(), a, b, n)
    return np.sum(vecs ** 2, axis=1)


# ---------------------------------------------------------------------------
# integrated density of states


@dataclass(frozen=True)
class IdsCurve:
    """Per-sample finite-volume IDS N_L(E) = count_leq(H, E) / L^d on a grid."""

    energies: np.ndarray
    per_sample: np.ndarray  # shape (samples, len(energies))
    box: BoxSpec
    seed: int
    config_digest: str = ""

    @property
    def mean(self) -> np.ndarray:
        return self.per_sample.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        n = self.per_sample.shape[0]
        if n < 2:
            return np.zeros(self.per_sample.shape[1])
        return self.per_sample.std(axis=0, ddof=1) / math.sqrt(n)

    def nonzero_counts(self) -> np.ndarray:
        """Number of samples with a strictly positive IDS at each energy."""
        return (self.per_sample > 0.0).sum(axis=0)

    def ensemble(self, k: int) -> EnsembleResult:
        return EnsembleResult.from_samples(self.per_sample[:, k], self.seed,
                                           self.config_digest)


def _ids_observable(payload, i: int) -> np.ndarray:
    spec, box, seed, energies = payload
    sample = sample_disorder(spec, box, seed, i)
    H = assemble_hamiltonian(spec, sample)
    counts = [spectral.count_leq(H, float(E)) for E in energies]
    return np.asarray(counts, dtype=float) / box.num_sites


def estimate_ids(spec: ModelSpec, box: BoxSpec, energy_grid, samples: int,
                 seed: int, workers: int = 1, config_digest: str = "") -> IdsCurve:
    """Monte Carlo estimate of the finite-volume IDS on an energy grid."""
    validate_box_for_model(spec, box)
    energies = np.sort(np.asarray(energy_grid, dtype=float))
    per_sample = run_ensemble(_ids_observable, (spec, box, int(seed), energies),
                              samples, workers)
    return IdsCurve(energies=energies, per_sample=per_sample, box=box,
                    seed=int(seed), config_digest=config_digest)


@dataclass(frozen=True)
class DosCurve:
    energies: np.ndarray
    per_sample: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray


def estimate_dos(ids: IdsCurve, bandwidth: float) -> DosCurve:
    """Density of states as the smoothed central difference of the IDS.

    Each sample's IDS is averaged over a flat window of the given bandwidth
    and differentiated by central differences; since every per-sample IDS is
    nondecreasing the result is nonnegative (tiny negative roundoff is
    clamped to 0).
    """
    E = ids.energies
    if E.size < 3:
        raise UsageError("need at least 3 energy grid points")
    de = float(np.median(np.diff(E)))
    if bandwidth < 2.0 * de - 1e-12:
        raise UsageError(f"bandwidth {bandwidth} below twice the grid spacing {de}")
    width = max(1, int(round(bandwidth / de)))
    if width % 2 == 0:
        width += 1
    kernel = np.ones(width) / width
    pad = width // 2
    rows = []
    for row in ids.per_sample:
        padded = np.concatenate([np.full(pad, row[0]), row, np.full(pad, row[-1])])
        smooth = np.convolve(padded, kernel, mode="valid")
        deriv = (smooth[2:] - smooth[:-2]) / (E[2:] - E[:-2])
        rows.append(np.maximum(deriv, 0.0))
    per_sample = np.asarray(rows)
    n = per_sample.shape[0]
    stderr = (per_sample.std(axis=0, ddof=1) / math.sqrt(n)) if n > 1 else \
        np.zeros(per_sample.shape[1])
    return DosCurve(energies=E[1:-1], per_sample=per_sample,
                    mean=per_sample.mean(axis=0), stderr=stderr)


# ---------------------------------------------------------------------------
# Wegner experiments


@dataclass(frozen=True)
class WegnerReport:
    E0: float
    interval: tuple[float, float]
    mean_trace: EnsembleResult
    Q_value: float
    volume: int
    K_empirical: float
    bound_rhs: Optional[float] = None
    per_site: Optional[dict[Site, EnsembleResult]] = None
    violation: Optional[bool] = None

    @property
    def K_stderr(self) -> float:
        denom = self.Q_value * (self.volume if self.per_site is None else 1)
        return self.mean_trace.stderr / denom if denom > 0 else 0.0


def _require_covering(spec: ModelSpec, box: BoxSpec) -> None:
    if spec.site.delta_minus < 1.0:
        raise UsageError("covering condition delta_minus >= 1 is violated")
    report = geometry_checks(spec, box)
    if report.covering_min < spec.site.u_minus - 1e-12:
        raise UsageError(
            f"wrapped bumps do not cover the torus: min = {report.covering_min}, "
            f"required >= {spec.site.u_minus}")


def _count_observable(payload, i: int) -> np.ndarray:
    spec, box, seed, interval, dense_threshold = payload
    sample = sample_disorder(spec, box, seed, i)
    H = assemble_hamiltonian(spec, sample)
    res = spectral.window_trace(H, interval, dense_threshold=dense_threshold)
    return np.asarray([res.weighted_trace])


def wegner_experiment(spec: ModelSpec, box: BoxSpec, interval, samples: int,
                      seed: int, workers: int = 1,
                      dense_threshold: int = spectral.DENSE_THRESHOLD,
                      config_digest: str = "") -> WegnerReport:
    """Estimate E{ tr P(I) } and the global Wegner ratio K = mean / (Q |Lambda|)."""
    validate_box_for_model(spec, box)
    _require_covering(spec, box)
    a, b = float(interval[0]), float(interval[1])
    values = run_ensemble(_count_observable,
                          (spec, box, int(seed), (a, b), dense_threshold),
                          samples, workers)[:, 0]
    ens = EnsembleResult.from_samples(values, seed, config_digest)
    q = q_lambda(box_distributions(spec, box), b - a)
    vol = box.num_sites
    k_emp = ens.mean / (q * vol) if q > 0 else 0.0
    return WegnerReport(E0=b, interval=(a, b), mean_trace=ens, Q_value=q,
                        volume=vol, K_empirical=k_emp)


def _local_traces_observable(payload, i: int) -> np.ndarray:
    spec, box, seed, interval, dense_threshold = payload
    sample = sample_disorder(spec, box, seed, i)
    H = assemble_hamiltonian(spec, sample)
    density = _window_density(H, interval, dense_threshold)
    return site_traces(spec, box, density)


def local_wegner_experiment(spec: ModelSpec, box: BoxSpec, interval, samples: int,
                            seed: int, workers: int = 1,
                            dense_threshold: int = spectral.DENSE_THRESHOLD,
                            config_digest: str = "") -> WegnerReport:
    """Per-site means of tr P(I) u_j for every site, plus the max-site ratio.

    The reported K has no volume factor: boundedness uniformly in L is the
    content of the local estimate.
    """
    validate_box_for_model(spec, box)
    _require_covering(spec, box)
    a, b = float(interval[0]), float(interval[1])
    traces = run_ensemble(_local_traces_observable,
                          (spec, box, int(seed), (a, b), dense_threshold),
                          samples, workers)  # (samples, num_sites)
    sites = list(box.sites())
    per_site = {j: EnsembleResult.from_samples(traces[:, k], seed, config_digest)
                for k, j in enumerate(sites)}
    means = traces.mean(axis=0)
    k_max = int(np.argmax(means))
    ens_max = per_site[sites[k_max]]
    q = q_lambda(box_distributions(spec, box), b - a)
    k_emp = ens_max.mean / q if q > 0 else 0.0
    return WegnerReport(E0=b, interval=(a, b), mean_trace=ens_max, Q_value=q,
                        volume=box.num_sites, K_empirical=k_emp, per_site=per_site)


# ---------------------------------------------------------------------------
# spectral averaging over a single coupling


def _single_site_resample(payload, i: int) -> np.ndarray:
    spec, box, seed, j, interval, weight, dense_threshold, background = payload
    dist = spec.distribution_at(j)
    rng = np.random.Generator(np.random.PCG64(site_stream_seed(seed, i + 1, j)))
    values = dict(background)
    values[j] = float(dist.ppf(rng.random()))
    sample = DisorderSample(box=box, values=values, seed_path=(seed, i + 1))
    H = assemble_hamiltonian(spec, sample)
    res = spectral.window_trace(H, interval, w=weight,
                                dense_threshold=dense_threshold)
    return np.asarray([res.weighted_trace])


def spectral_averaging_experiment(spec: ModelSpec, box: BoxSpec, j, interval,
                                  weight, samples: int, seed: int,
                                  workers: int = 1,
                                  dense_threshold: int = spectral.DENSE_THRESHOLD,
                                  config_digest: str = "") -> WegnerReport:
    """Average tr sqrt(u_j) P(I) sqrt(u_j) S over the coupling at one site.

    All couplings except the one at site j are frozen to the draw with sample
    index 0; only omega_j is resampled.  S = diag(weight) and the comparison
    bound is (sum weight) * Q_{mu_j}(|I|); the report flags a violation beyond
    3 standard errors.
    """
    validate_box_for_model(spec, box)
    j = tuple(int(c) for c in j)
    a, b = float(interval[0]), float(interval[1])
    wv = spectral._weight_values(weight, box.total_points)
    if wv is None:
        wv = np.ones(box.total_points)
    if np.any(wv < 0):
        raise UsageError("spectral averaging weight must be nonnegative")
    uj = site_weight(spec, box, j).values
    background = sample_disorder(spec, box, seed, 0).values
    values = run_ensemble(
        _single_site_resample,
        (spec, box, int(seed), j, (a, b), uj * wv, dense_threshold, background),
        samples, workers)[:, 0]
    ens = EnsembleResult.from_samples(values, seed, config_digest)
    q = wegner_Q(spec.distribution_at(j), b - a)
    rhs = float(wv.sum()) * q
    violation = ens.mean > rhs + 3.0 * ens.stderr
    return WegnerReport(E0=b, interval=(a, b), mean_trace=ens, Q_value=q,
                        volume=box.num_sites, K_empirical=ens.mean / q if q > 0 else 0.0,
                        bound_rhs=rhs, violation=bool(violation))


# ---------------------------------------------------------------------------
# decay scan of the local Wegner ratio


@dataclass(frozen=True)
class KlwScan:
    reports: list[WegnerReport]
    eta: float
    alpha: Optional[float]
    rhs_exponential: np.ndarray  # exp(-E0^(-d/2 + eta)) per point
    shape_exponent: Optional[float]  # alpha (1 - eta/2)
    nonincreasing_ok: bool
    slope: Optional[float]
    slope_ok: Optional[bool]


def _spine_holder_alpha(spec: ModelSpec) -> Optional[float]:
    if spec.spine is None:
        return None
    mu = spec.spine.mu_gamma
    if mu.density_sup() is not None:
        return 1.0
    return mu.alpha  # power family with alpha < 1


def klw_decay_scan(spec: ModelSpec, box: BoxSpec, E0_list: Sequence[float],
                   interval_fraction: float, samples: int, seed: int,
                   eta: float = 0.5, workers: int = 1,
                   dense_threshold: int = spectral.DENSE_THRESHOLD,
                   slope_tolerance: float = 0.25,
                   config_digest: str = "") -> KlwScan:
    """Local Wegner ratio K(E0) along a decreasing energy list.

    Per point the window is [0, interval_fraction * E0].  Verdicts: K is
    nonincreasing within 2 combined standard errors, and the log-log slope of
    K against E0 (over points with positive mean, at least 2) reaches the
    Hoelder shape exponent alpha (1 - eta/2) minus the slope tolerance.
    """
    if spec.spine is None:
        raise UsageError("the decay scan compares against spine-based bounds; "
                         "the model has no spine")
    validate_box_for_model(spec, box, spine_experiment=True)
    E0s = [float(e) for e in E0_list]
    if any(b >= a for a, b in zip(E0s, E0s[1:])):
        raise UsageError("E0_list must be strictly decreasing")
    d = spec.dim
    alpha = _spine_holder_alpha(spec)
    reports = []
    for E0 in E0s:
        rep = local_wegner_experiment(spec, box, (0.0, interval_fraction * E0),
                                      samples, seed, workers, dense_threshold,
                                      config_digest)
        reports.append(replace(rep, E0=E0,
                               bound_rhs=math.exp(-E0 ** (-d / 2.0 + eta))))
    ks = np.array([r.K_empirical for r in reports])
    errs = np.array([r.K_stderr for r in reports])
    noninc = all(ks[i + 1] <= ks[i] + 2.0 * (errs[i] + errs[i + 1])
                 for i in range(len(ks) - 1))
    positive = ks > 0.0
    slope = None
    slope_ok = None
    shape_exp = None if alpha is None else alpha * (1.0 - eta / 2.0)
    if positive.sum() >= 2:
        coeff = np.polyfit(np.log(np.asarray(E0s)[positive]), np.log(ks[positive]), 1)
        slope = float(coeff[0])
        if shape_exp is not None:
            slope_ok = slope >= shape_exp - slope_tolerance
    return KlwScan(reports=reports, eta=eta, alpha=alpha,
                   rhs_exponential=np.array([r.bound_rhs for r in reports]),
                   shape_exponent=shape_exp, nonincreasing_ok=noninc,
                   slope=slope, slope_ok=slope_ok)


# ---------------------------------------------------------------------------
# Lifshitz-tail fitting


@dataclass(frozen=True)
class LifshitzFit:
    slope: float
    intercept: float
    residual: float
    energies_used: np.ndarray


def _loglog_fit(energies: np.ndarray, values: np.ndarray) -> LifshitzFit:
    x = np.log(energies)
    y = np.log(-np.log(values))
    coeff, res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0] / x.size)) if len(res) else 0.0
    return LifshitzFit(slope=float(coeff[0]), intercept=float(coeff[1]),
                       residual=residual, energies_used=energies)


def lifshitz_exponent_fit(ids: IdsCurve, fit_window, min_nonzero: int = 10,
                          min_points: int = 5) -> LifshitzFit:
    """Least-squares fit of log(-log N(E)) against log E on the fit window.

    Energy bins with fewer than min_nonzero samples contributing a positive
    count are dropped (the double logarithm needs N > 0 and the deep tail is
    dominated by rare events).  The slope's small-energy limit is the tail
    exponent, -d/2 for the models treated here.
    """
    lo, hi = float(fit_window[0]), float(fit_window[1])
    mean = ids.mean
    usable = ((ids.energies >= lo) & (ids.energies <= hi) & (mean > 0.0)
              & (mean < 1.0) & (ids.nonzero_counts() >= min_nonzero))
    if usable.sum() < min_points:
        raise FitError(
            f"only {int(usable.sum())} usable energy bins in [{lo}, {hi}] "
            f"(need {min_points}); increase samples or the box size")
    return _loglog_fit(ids.energies[usable], mean[usable])


def lifshitz_exponent_fit_dos(dos: DosCurve, fit_window,
                              min_points: int = 5) -> LifshitzFit:
    """Twin of lifshitz_exponent_fit acting on the differentiated curve n(E)."""
    lo, hi = float(fit_window[0]), float(fit_window[1])
    usable = ((dos.energies >= lo) & (dos.energies <= hi)
              & (dos.mean > 0.0) & (dos.mean < 1.0))
    if usable.sum() < min_points:
        raise FitError(f"only {int(usable.sum())} usable density bins in [{lo}, {hi}]")
    return _loglog_fit(dos.energies[usable], dos.mean[usable])


# ---------------------------------------------------------------------------
# randomized trials of the gap-trace inequality


@dataclass(frozen=True)
class GapTraceTrial:
    dimension: int
    E0: float
    gap_trace: float  # tr f(H) W h(H0), must be <= 0 up to roundoff
    pair_lhs: float   # tr f(H) W
    pair_rhs: float   # tr f(H) W g(H0), must dominate pair_lhs
    scale: float      # operator norm of W


def lemma31_random_trial(master_seed: int, index: int,
                         dim_range: tuple[int, int] = (4, 16)) -> GapTraceTrial:
    """One randomized dense instance of the gap-trace inequality.

    Gaussian symmetric H0 and W (W indefinite in general), split energy E0
    drawn inside the spectral range of H0 + W, sharp indicator f below E0 and
    h above it; g decays exponentially above E0 and equals 1 below.
    """
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))))
    n = int(rng.integers(dim_range[0], dim_range[1] + 1))
    A = rng.standard_normal((n, n))
    H0 = (A + A.T) / 2.0
    B = rng.standard_normal((n, n))
    W = (B + B.T) / 2.0
    evals = np.linalg.eigvalsh(H0 + W)
    E0 = float(rng.uniform(evals[0], evals[-1]))

    def f(lam):
        return (lam <= E0).astype(float)

    def h(lam):
        return (lam >= E0).astype(float)

    def g(lam):
        return np.where(lam <= E0, 1.0, np.exp(-(lam - E0)))

    gap = spectral.lemma31_gap_trace(H0, W, E0, f, h)
    lhs, rhs = spectral.lemma31_pair(H0, W, E0, f, g)
    scale = float(np.linalg.norm(W, 2))
    return GapTraceTrial(dimension=n, E0=E0, gap_trace=gap,
                         pair_lhs=lhs, pair_rhs=rhs, scale=scale)


# ---------------------------------------------------------------------------
# implicit-equation solver for the tail-optimization parameter


@dataclass(frozen=True)
class BetaSolution:
    beta: float
    bound: float
    bound_ok: bool
    premise_ok: bool
    residual: float


def beta_solve(C: float, alpha: float, s: float) -> BetaSolution:
    """Solve C beta^alpha = exp(-beta / (2s)) for beta > 0 by bisection.

    The map beta -> C beta^alpha exp(beta/(2s)) is strictly increasing from 0,
    so the root is unique.  The companion bound is
    beta <= 2 alpha s log(1 / (2 alpha s C^(1/alpha))), valid under the
    premise 6 alpha s C^(1/alpha) <= 1; bound_ok is reported False (with
    premise_ok False) when the premise fails.
    """
    if C <= 0 or alpha <= 0 or s <= 0:
        raise UsageError("need C > 0, alpha > 0, s > 0")

    def g(beta: float) -> float:
        return C * beta ** alpha * math.exp(beta / (2.0 * s)) - 1.0

    hi = 2.0 * s
    while g(hi) < 0.0:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    residual = abs(C * beta ** alpha * math.exp(beta / (2.0 * s)) - 1.0)
    arg = 2.0 * alpha * s * C ** (1.0 / alpha)
    premise_ok = 6.0 * alpha * s * C ** (1.0 / alpha) <= 1.0
    bound = 2.0 * alpha * s * math.log(1.0 / arg) if arg < 1.0 else math.nan
    bound_ok = bool(premise_ok and beta <= bound * (1.0 + 1e-12))
    return BetaSolution(beta=beta, bound=bound, bound_ok=bound_ok,
                        premise_ok=premise_ok, residual=residual)


# ---------------------------------------------------------------------------
# abstract right-hand sides for shape comparisons


def smallest_integer_above(x: float) -> int:
    """Smallest integer strictly greater than x."""
    return math.floor(x) + 1


def theorem_bounds(part: str, *, d: Optional[int] = None, E0: Optional[float] = None,
                   eta: Optional[float] = None, alpha: Optional[float] = None,
                   u_minus: Optional[float] = None, C: Optional[float] = None,
                   C_eta: Optional[float] = None, C_mu: Optional[float] = None,
                   q_value: float = 1.0) -> float:
    """Evaluate the abstract right-hand-side shapes of the local Wegner bounds.

    All unnamed constants are caller-supplied; results are meant for shape and
    monotonicity comparisons only, never as absolute ground truth.
    """
    def need(**kw):
        missing = [k for k, v in kw.items() if v is None]
        if missing:
            raise UsageError(f"part {part!r} needs constants: {', '.join(missing)}")

    if part == "i":
        need(d=d, E0=E0, u_minus=u_minus, C=C)
        p = smallest_integer_above(d / 4.0)
        return (C * u_minus ** -1.5 * (1.0 + E0) ** (2 * p)
                * (1.0 + math.log(1.0 + E0)) * q_value)
    if part == "ii":
        need(d=d, E0=E0, eta=eta)
        return math.exp(-E0 ** (-d / 2.0 + eta)) * q_value
    if part == "iii":
        need(E0=E0, eta=eta, alpha=alpha, C_eta=C_eta, C_mu=C_mu)
        arg = 2.0 * alpha * E0 * math.log(1.0 / (2.0 * alpha * E0 * C_mu ** (1.0 / alpha)))
        return C_eta * (C_mu * arg ** alpha) ** (1.0 - eta) * q_value
    raise UsageError(f"unknown part {part!r}; expected 'i', 'ii', or 'iii'")
