"""Experiment configuration: TOML parsing, validation, and content digests.

Schema (TOML, all tables except [model] and [box] optional where noted):

    seed = 12345                # 64-bit master seed
    samples = 500               # >= 1
    workers = 1
    output = "results.csv"
    dense_threshold = 4096

    [model]
    dim = 1
    [model.periodic]            # optional; default zero background
    period = 1
    kind = "zero"               # "zero" | "constant" | "cosine"
    value = 0.0                 # constant level, or cosine amplitude
    [model.site]                # optional; default unit indicator
    profile = "indicator"       # "indicator" | "plateau_bump"
    delta_minus = 1.0
    delta_plus = 1.0
    u_minus = 1.0
    [model.disorder]
    family = "uniform"          # "uniform" | "power" | "triangular"
    M = 1.0
    alpha = 0.5                 # power family only
    [model.spine]               # optional
    j0 = [0]
    order = 1
    family = "uniform"
    M = 1.0
    [[model.overrides]]         # optional, repeatable
    site = [3]
    family = "triangular"
    M = 2.0

    [box]
    side = 32
    grid_per_unit = 4
    center = [0]                # optional

    [experiment]
    type = "ids"                # ids | dos | wegner | local-wegner | klw-scan
                                # | spectral-averaging | lifshitz | lemma31 | beta
    # ids / dos / lifshitz: energy_min, energy_max, energy_points
    # dos: bandwidth;  lifshitz: fit_window = [lo, hi]
    # wegner / local-wegner / spectral-averaging: interval = [a, b]
    # spectral-averaging: site = [0], weight = "ones" | "site-indicator"
    # klw-scan: E0_list = [0.4, 0.2], interval_fraction = 0.5, eta = 0.5
    # lemma31: trials = 100
    # beta: C = [1.0], alpha = [1.0], s = [0.01]   (cartesian sweep)

The "cosine" background is amplitude * sum_axis cos(2 pi x_axis / period),
sampled at the box resolution.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError
from .lattice import BoxSpec
from .model import (ModelSpec, PeriodicPotential, SingleSitePotential,
                    SiteDistributionSpec, SpineSpec)

EXPERIMENTS = ("ids", "dos", "wegner", "local-wegner", "klw-scan",
               "spectral-averaging", "lifshitz", "lemma31", "beta")

_SPINE_EXPERIMENTS = ("klw-scan",)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec  # not yet normalized
    box: BoxSpec
    experiment: str
    params: dict[str, Any]
    seed: int
    samples: int
    workers: int
    output: str
    dense_threshold: int
    digest: str
    canonical: dict[str, Any] = field(repr=False, default_factory=dict)


def _dist_from(table: dict, where: str, errors: list[str]) -> SiteDistributionSpec | None:
    family = table.get("family", "uniform")
    try:
        return SiteDistributionSpec(family=family, M=float(table.get("M", 1.0)),
                                    alpha=float(table.get("alpha", 1.0)))
    except ConfigurationError as err:
        errors.append(f"{where}: {err}")
        return None


def _build_model(raw: dict, box: BoxSpec | None, errors: list[str]) -> ModelSpec | None:
    mtab = raw.get("model")
    if not isinstance(mtab, dict):
        errors.append("missing [model] table")
        return None
    dim = int(mtab.get("dim", 1))

    ptab = mtab.get("periodic", {})
    period = int(ptab.get("period", 1))
    kind = ptab.get("kind", "zero")
    value = float(ptab.get("value", 0.0))
    try:
        if kind == "zero":
            periodic = PeriodicPotential.zero(period)
        elif kind == "constant":
            periodic = PeriodicPotential.constant_field(value, period)
        elif kind == "cosine":
            if box is None:
                errors.append("model.periodic: cosine background needs a valid box")
                return None
            periodic = PeriodicPotential.from_function(
                lambda x: value * np.sum(np.cos(2.0 * math.pi * x / period), axis=-1),
                period, box.grid_per_unit, dim)
        else:
            errors.append(f"model.periodic.kind: unknown kind {kind!r}")
            return None
    except ConfigurationError as err:
        errors.append(f"model.periodic: {err}")
        return None

    stab = mtab.get("site", {})
    try:
        site = SingleSitePotential(
            profile=stab.get("profile", "indicator"),
            delta_minus=float(stab.get("delta_minus", 1.0)),
            delta_plus=float(stab.get("delta_plus", 1.0)),
            u_minus=float(stab.get("u_minus", 1.0)))
    except ConfigurationError as err:
        errors.append(f"model.site: {err}")
        return None

    dtab = mtab.get("disorder")
    if not isinstance(dtab, dict):
        errors.append("missing [model.disorder] table")
        return None
    default_dist = _dist_from(dtab, "model.disorder", errors)
    if default_dist is None:
        return None

    spine = None
    if "spine" in mtab:
        sptab = mtab["spine"]
        mu = _dist_from(sptab, "model.spine", errors)
        j0 = tuple(int(c) for c in sptab.get("j0", [0] * dim))
        if len(j0) != dim:
            errors.append("model.spine.j0: wrong dimension")
        elif mu is not None:
            try:
                spine = SpineSpec(j0=j0, K=int(sptab.get("order", 1)), mu_gamma=mu)
            except ConfigurationError as err:
                errors.append(f"model.spine: {err}")

    overrides = {}
    for k, otab in enumerate(mtab.get("overrides", [])):
        site_key = otab.get("site")
        if site_key is None or len(site_key) != dim:
            errors.append(f"model.overrides[{k}].site: need {dim} coordinates")
            continue
        dist = _dist_from(otab, f"model.overrides[{k}]", errors)
        if dist is not None:
            overrides[tuple(int(c) for c in site_key)] = dist

    if errors:
        return None
    try:
        return ModelSpec(dim=dim, periodic=periodic, site=site,
                         default_dist=default_dist, overrides=overrides, spine=spine)
    except ConfigurationError as err:
        errors.append(f"model: {err}")
        return None


def _build_box(raw: dict, errors: list[str]) -> BoxSpec | None:
    btab = raw.get("box")
    if not isinstance(btab, dict):
        errors.append("missing [box] table")
        return None
    dim = int(raw.get("model", {}).get("dim", 1))
    try:
        return BoxSpec(side=int(btab.get("side", 0)),
                       grid_per_unit=int(btab.get("grid_per_unit", 1)),
                       dim=dim,
                       center=tuple(int(c) for c in btab.get("center", [])) or ())
    except ConfigurationError as err:
        errors.append(f"box: {err}")
        return None


def _check_cross_constraints(model: ModelSpec, box: BoxSpec, experiment: str,
                             errors: list[str]) -> None:
    q = model.periodic.period
    if box.side % 2 != 0:
        errors.append(f"box.side: L = {box.side} must be even")
    if box.side % (2 * q) != 0:
        errors.append(f"box.side: L = {box.side} must satisfy 2q | L with q = {q}")
    if box.side <= model.site.delta_plus:
        errors.append(f"box.side: L = {box.side} must exceed delta_plus = "
                      f"{model.site.delta_plus}")
    if experiment in _SPINE_EXPERIMENTS:
        if model.spine is None:
            errors.append(f"experiment {experiment!r} requires [model.spine]")
        else:
            kq = 2 * q * model.spine.K
            if box.side % kq != 0:
                errors.append(f"box.side: spine experiments need 2qK | L; "
                              f"L = {box.side}, 2qK = {kq}")


_REQUIRED_PARAMS = {
    "ids": ("energy_min", "energy_max", "energy_points"),
    "dos": ("energy_min", "energy_max", "energy_points", "bandwidth"),
    "lifshitz": ("energy_min", "energy_max", "energy_points", "fit_window"),
    "wegner": ("interval",),
    "local-wegner": ("interval",),
    "spectral-averaging": ("interval", "site"),
    "klw-scan": ("E0_list",),
    "lemma31": (),
    "beta": ("C", "alpha", "s"),
}

_PARAM_DEFAULTS = {
    "klw-scan": {"interval_fraction": 0.5, "eta": 0.5},
    "lemma31": {"trials": 100},
    "spectral-averaging": {"weight": "ones"},
}


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float) and obj == int(obj):
        return obj
    return obj


def validate_config(text: str, *, seed: int | None = None,
                    samples: int | None = None, workers: int | None = None,
                    output: str | None = None,
                    dense_threshold: int | None = None) -> ExperimentConfig:
    """Parse and fully validate a TOML experiment configuration.

    Keyword arguments override the corresponding top-level keys (the CLI
    flags); semantic overrides (seed, samples, dense_threshold) feed into the
    digest like any other config content.  Raises ConfigurationError listing
    every violation found (one per line), with parse errors reported with
    their position.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigurationError(f"parse error: {err}") from err
    for key, val in (("seed", seed), ("samples", samples), ("workers", workers),
                     ("output", output), ("dense_threshold", dense_threshold)):
        if val is not None:
            raw[key] = val

    errors: list[str] = []
    box = _build_box(raw, errors)
    model = _build_model(raw, box, errors)

    etab = raw.get("experiment")
    experiment = None
    params: dict[str, Any] = {}
    if not isinstance(etab, dict):
        errors.append("missing [experiment] table")
    else:
        experiment = etab.get("type")
        if experiment not in EXPERIMENTS:
            errors.append(f"experiment.type: unknown type {experiment!r}; "
                          f"expected one of {', '.join(EXPERIMENTS)}")
            experiment = None
        else:
            params = {k: v for k, v in etab.items() if k != "type"}
            params = {**_PARAM_DEFAULTS.get(experiment, {}), **params}
            for key in _REQUIRED_PARAMS[experiment]:
                if key not in params:
                    errors.append(f"experiment.{key}: required for {experiment!r}")

    samples = int(raw.get("samples", 100))
    if samples < 1:
        errors.append("samples: must be >= 1")
    seed = int(raw.get("seed", 0))
    workers = int(raw.get("workers", 1))
    dense_threshold = int(raw.get("dense_threshold", 4096))
    output = str(raw.get("output", "results.csv"))

    if model is not None and box is not None and experiment is not None:
        _check_cross_constraints(model, box, experiment, errors)

    if errors:
        raise ConfigurationError("\n".join(errors))

    semantic = _canonical({
        "model": raw.get("model", {}),
        "box": raw.get("box", {}),
        "experiment": {**params, "type": experiment},
        "samples": samples, "seed": seed,
        "dense_threshold": dense_threshold,
    })
    digest = hashlib.sha256(
        json.dumps(semantic, sort_keys=True).encode()).hexdigest()[:16]

    return ExperimentConfig(model=model, box=box, experiment=experiment,
                            params=params, seed=seed, samples=samples,
                            workers=workers, output=output,
                            dense_threshold=dense_threshold, digest=digest,
                            canonical=semantic)
