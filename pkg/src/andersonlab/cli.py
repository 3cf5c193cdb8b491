"""Batch experiment runner.

Reads a TOML configuration (schema documented in :mod:`andersonlab.config`),
runs one experiment, and writes a single output file: one JSON metadata line
followed by CSV rows with a fixed per-experiment column schema.  Output is
deterministic for a fixed (config, seed) regardless of worker count.

Exit codes: 0 pass/complete, 1 verdict fail, 2 configuration error,
3 capacity error / incomplete run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__, estimators
from .config import ExperimentConfig, validate_config
from .errors import AndersonLabError, CapacityError, ConfigurationError, FitError
from .lattice import indicator_weight
from .model import normalize_model

_SCHEMAS = {
    "ids": ["E", "N_mean", "N_stderr", "samples", "L", "n", "d"],
    "dos": ["E", "n_mean", "n_stderr", "samples", "L", "n", "d"],
    "wegner": ["E0", "I_lo", "I_hi", "site_or_global", "mean", "stderr", "Q", "K_emp"],
    "local-wegner": ["E0", "I_lo", "I_hi", "site_or_global", "mean", "stderr", "Q", "K_emp"],
    "klw-scan": ["E0", "I_lo", "I_hi", "site_or_global", "mean", "stderr", "Q",
                 "K_emp", "eta", "rhs_part_ii"],
    "spectral-averaging": ["E0", "I_lo", "I_hi", "site", "mean", "stderr",
                           "rhs", "violation"],
    "lifshitz": ["E", "logE", "loglogN", "fit_slope", "fit_residual"],
    "lemma31": ["trial", "trace_value"],
    "beta": ["C", "alpha", "s", "beta", "bound", "bound_ok"],
}


def _site_label(j) -> str:
    return ";".join(str(int(c)) for c in j)


def _energy_grid(params) -> np.ndarray:
    return np.linspace(float(params["energy_min"]), float(params["energy_max"]),
                       int(params["energy_points"]))


def _run_ids(cfg: ExperimentConfig):
    spec = normalize_model(cfg.model, cfg.box)
    ids = estimators.estimate_ids(spec, cfg.box, _energy_grid(cfg.params),
                                  cfg.samples, cfg.seed, cfg.workers, cfg.digest)
    rows = [[E, m, s, cfg.samples, cfg.box.side, cfg.box.grid_per_unit, cfg.model.dim]
            for E, m, s in zip(ids.energies, ids.mean, ids.stderr)]
    return rows, f"ids: COMPLETE ({cfg.samples} samples, {len(rows)} energies)", 0


def _run_dos(cfg: ExperimentConfig):
    spec = normalize_model(cfg.model, cfg.box)
    ids = estimators.estimate_ids(spec, cfg.box, _energy_grid(cfg.params),
                                  cfg.samples, cfg.seed, cfg.workers, cfg.digest)
    dos = estimators.estimate_dos(ids, float(cfg.params["bandwidth"]))
    rows = [[E, m, s, cfg.samples, cfg.box.side, cfg.box.grid_per_unit, cfg.model.dim]
            for E, m, s in zip(dos.energies, dos.mean, dos.stderr)]
    return rows, f"dos: COMPLETE ({cfg.samples} samples)", 0


def _run_wegner(cfg: ExperimentConfig):
    spec = normalize_model(cfg.model, cfg.box)
    a, b = cfg.params["interval"]
    rep = estimators.wegner_experiment(spec, cfg.box, (a, b), cfg.samples,
                                       cfg.seed, cfg.workers, cfg.dense_threshold,
                                       cfg.digest)
    rows = [[rep.E0, a, b, "global", rep.mean_trace.mean, rep.mean_trace.stderr,
             rep.Q_value, rep.K_empirical]]
    return rows, f"wegner: COMPLETE (K_W = {rep.K_empirical:.6g})", 0


def _run_local_wegner(cfg: ExperimentConfig):
    spec = normalize_model(cfg.model, cfg.box)
    a, b = cfg.params["interval"]
    rep = estimators.local_wegner_experiment(spec, cfg.box, (a, b), cfg.samples,
                                             cfg.seed, cfg.workers,
                                             cfg.dense_threshold, cfg.digest)
    rows = []
    for j, ens in rep.per_site.items():
        rows.append([rep.E0, a, b, _site_label(j), ens.mean, ens.stderr,
                     rep.Q_value, ens.mean / rep.Q_value if rep.Q_value > 0 else 0.0])
    rows.append([rep.E0, a, b, "max", rep.mean_trace.mean, rep.mean_trace.stderr,
                 rep.Q_value, rep.K_empirical])
    return rows, f"local-wegner: COMPLETE (K_LW = {rep.K_empirical:.6g})", 0


def _run_klw_scan(cfg: ExperimentConfig):
    spec = normalize_model(cfg.model, cfg.box)
    scan = estimators.klw_decay_scan(
        spec, cfg.box, [float(e) for e in cfg.params["E0_list"]],
        float(cfg.params["interval_fraction"]), cfg.samples, cfg.seed,
        float(cfg.params["eta"]), cfg.workers, cfg.dense_threshold,
        config_digest=cfg.digest)
    rows = []
    for rep in scan.reports:
        rows.append([rep.E0, rep.interval[0], rep.interval[1], "max",
                     rep.mean_trace.mean, rep.mean_trace.stderr, rep.Q_value,
                     rep.K_empirical, scan.eta, rep.bound_rhs])
    if len(scan.reports) == 1:
        return rows, "klw-scan: COMPLETE (single point)", 0
    ok = scan.nonincreasing_ok and scan.slope_ok is not False and scan.slope is not None
    verdict = "PASS" if ok else "FAIL"
    slope_txt = "n/a" if scan.slope is None else f"{scan.slope:.4g}"
    return rows, (f"klw-scan: {verdict} (nonincreasing={scan.nonincreasing_ok}, "
                  f"slope={slope_txt}, shape_exponent={scan.shape_exponent})"), \
        0 if ok else 1


def _run_spectral_averaging(cfg: ExperimentConfig):
    spec = normalize_model(cfg.model, cfg.box)
    a, b = cfg.params["interval"]
    j = tuple(int(c) for c in cfg.params["site"])
    weight = None
    if cfg.params["weight"] == "site-indicator":
        weight = indicator_weight(cfg.box, j)
    rep = estimators.spectral_averaging_experiment(
        spec, cfg.box, j, (a, b), weight, cfg.samples, cfg.seed, cfg.workers,
        cfg.dense_threshold, cfg.digest)
    rows = [[rep.E0, a, b, _site_label(j), rep.mean_trace.mean,
             rep.mean_trace.stderr, rep.bound_rhs, rep.violation]]
    verdict = "FAIL" if rep.violation else "PASS"
    return rows, (f"spectral-averaging: {verdict} (mean = {rep.mean_trace.mean:.6g}, "
                  f"bound = {rep.bound_rhs:.6g})"), 1 if rep.violation else 0


def _run_lifshitz(cfg: ExperimentConfig):
    spec = normalize_model(cfg.model, cfg.box)
    ids = estimators.estimate_ids(spec, cfg.box, _energy_grid(cfg.params),
                                  cfg.samples, cfg.seed, cfg.workers, cfg.digest)
    lo, hi = cfg.params["fit_window"]
    fit = estimators.lifshitz_exponent_fit(ids, (float(lo), float(hi)))
    used = set(float(e) for e in fit.energies_used)
    rows = []
    for E, m in zip(ids.energies, ids.mean):
        if float(E) in used:
            rows.append([E, math.log(E), math.log(-math.log(m)),
                         fit.slope, fit.residual])
    return rows, f"lifshitz: COMPLETE (slope = {fit.slope:.4g})", 0


def _run_lemma31(cfg: ExperimentConfig):
    trials = int(cfg.params["trials"])
    rows = []
    worst = -math.inf
    ok = True
    for t in range(trials):
        trial = estimators.lemma31_random_trial(cfg.seed, t)
        tol = 1e-10 * max(trial.scale, 1.0)
        rows.append([t, trial.gap_trace])
        worst = max(worst, trial.gap_trace / max(trial.scale, 1.0))
        if trial.gap_trace > tol or trial.pair_lhs > trial.pair_rhs + tol:
            ok = False
    verdict = "PASS" if ok else "FAIL"
    return rows, (f"lemma31: {verdict} ({trials} trials, worst scaled trace "
                  f"{worst:.3e})"), 0 if ok else 1


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _run_beta(cfg: ExperimentConfig):
    rows = []
    ok = True
    for C in _as_list(cfg.params["C"]):
        for alpha in _as_list(cfg.params["alpha"]):
            for s in _as_list(cfg.params["s"]):
                sol = estimators.beta_solve(float(C), float(alpha), float(s))
                rows.append([C, alpha, s, sol.beta, sol.bound, sol.bound_ok])
                if sol.residual > 1e-9 or (sol.premise_ok and not sol.bound_ok):
                    ok = False
    verdict = "PASS" if ok else "FAIL"
    return rows, f"beta: {verdict} ({len(rows)} points)", 0 if ok else 1


_RUNNERS = {
    "ids": _run_ids,
    "dos": _run_dos,
    "wegner": _run_wegner,
    "local-wegner": _run_local_wegner,
    "klw-scan": _run_klw_scan,
    "spectral-averaging": _run_spectral_averaging,
    "lifshitz": _run_lifshitz,
    "lemma31": _run_lemma31,
    "beta": _run_beta,
}


def _write_output(path: str, cfg: ExperimentConfig, rows, marker: str | None = None):
    meta = {"config_digest": cfg.digest, "seed": cfg.seed, "samples": cfg.samples,
            "tool_version": __version__, "experiment": cfg.experiment,
            "schema": _SCHEMAS[cfg.experiment]}
    buf = io.StringIO()
    buf.write(json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SCHEMAS[cfg.experiment])
    for row in rows:
        writer.writerow(row)
    if marker is not None:
        buf.write(f"# incomplete: {marker}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one validated experiment, write its artifact, print the verdict."""
    try:
        rows, verdict, code = _RUNNERS[cfg.experiment](cfg)
    except CapacityError as err:
        _write_output(cfg.output, cfg, [], marker=str(err))
        print(f"{cfg.experiment}: INCOMPLETE (capacity): {err}", file=sys.stderr)
        print("hint: raise --dense-threshold or shrink the box / grid",
              file=sys.stderr)
        return 3
    except FitError as err:
        _write_output(cfg.output, cfg, [], marker=str(err))
        print(f"{cfg.experiment}: INCOMPLETE (fit): {err}", file=sys.stderr)
        return 3
    _write_output(cfg.output, cfg, rows)
    print(verdict)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="andersonlab",
        description="Monte Carlo spectral experiments for disordered "
                    "Schrödinger operators on the torus")
    parser.add_argument("--config", required=True, help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument("--samples", type=int, default=None, help="override sample count")
    parser.add_argument("--workers", type=int, default=None, help="parallel workers")
    parser.add_argument("--out", default=None, help="override output path")
    parser.add_argument("--dense-threshold", type=int, default=None,
                        help="max dimension for dense eigensolves")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    try:
        cfg = validate_config(text, seed=args.seed, samples=args.samples,
                              workers=args.workers, output=args.out,
                              dense_threshold=args.dense_threshold)
    except ConfigurationError as err:
        print(f"configuration error:\n{err}", file=sys.stderr)
        return 2
    try:
        return run_experiment(cfg)
    except AndersonLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
