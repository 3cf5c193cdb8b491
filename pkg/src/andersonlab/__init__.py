"""Finite-volume random Schrödinger operators on the torus: disorder sampling,
Hamiltonian assembly, concentration functions, and Monte Carlo spectral
experiments (Wegner ratios, integrated density of states, Lifshitz tails)."""

from .concentration import (ConcentrationProfile, HolderEstimate,
                            box_distributions, concentration_S, holder_constant,
                            moment_order_md, profile_for, q_lambda, wegner_Q)
from .config import EXPERIMENTS, ExperimentConfig, validate_config
from .errors import (AndersonLabError, CapacityError, ConfigurationError,
                     DomainError, FitError, UsageError)
from .estimators import (BetaSolution, DosCurve, EnsembleResult, GapTraceTrial,
                         IdsCurve, KlwScan, LifshitzFit, WegnerReport,
                         beta_solve, estimate_dos, estimate_ids, klw_decay_scan,
                         lemma31_random_trial, lifshitz_exponent_fit,
                         lifshitz_exponent_fit_dos, local_wegner_experiment,
                         run_ensemble, smallest_integer_above,
                         spectral_averaging_experiment, theorem_bounds,
                         wegner_experiment)
from .lattice import (BoxSpec, GeometryReport, GridFunction, assemble_hamiltonian,
                      build_free_operator, build_laplacian, dump_triplets,
                      geometry_checks, indicator_weight, site_weight,
                      validate_box_for_model)
from .model import (DisorderSample, ModelSpec, PeriodicPotential,
                    SingleSitePotential, SiteDistributionSpec, SpineSpec,
                    normalize_model, sample_disorder, subspine_for)
from .spectral import (SpectralWindowResult, count_leq, full_spectrum,
                       lemma31_gap_trace, lemma31_pair, matrix_function,
                       window_trace)

__version__ = "0.1.0"
