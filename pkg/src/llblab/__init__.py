"""Numerical laboratory for a stochastic Landau-Lifshitz-Bloch equation.

Pseudo-spectral fields on a periodic square, localized multiplicative
noise with an exact Ito correction, coupled-path integrators, tail and
energy diagnostics, empirical invariant measures, and ladder studies
with falsifiable verdicts.
"""

from .config import (ResolvedConfig, config_hash, emit_config, load_config,
                     make_initial, resolve_config)
from .diagnostics import (DEFAULT_CUTOFF, CutoffFamily, DiagnosticsRecord,
                          DiagnosticsRecorder, EnvelopeReport,
                          cutoff_eval, dissipativity_envelope_check,
                          l2_balance_residual, norm_sq,
                          run_balance_ensemble, step_l2_residual, tail_mass)
from .dynamics import (DRIFT_TERMS, SCHEMES, Observer, PathState, SimConfig,
                       drift, integrate, make_state, resolve_threads,
                       run_ensemble, step_em_ito, step_heun_strat)
from .errors import (BlowUpError, CheckpointCorruptError,
                     CheckpointFormatError, ConfigError, GridMismatchError,
                     InvalidFieldError, LabError, ParameterError)
from .experiments import (STUDY_KINDS, StudyReport, StudySpec,
                          dyadic_increment_table, run_study, wilson_interval)
from .fields import (Grid, VectorField, biharmonic, constant_field, cross,
                     cubic_damping, dealias, dealias_mask, fourier_mode_field,
                     from_fourier, gaussian_bump_field, gradient, l2_inner,
                     laplacian, random_smooth_field, to_fourier, zero_field)
from .measures import (EmpiricalMeasure, TestFunctional, collect_empirical,
                       default_functionals, invariance_defect, smooth_lift,
                       weak_distance)
from .noise import (NoiseBasis, NoiseParams, NoiseStream, WienerIncrements,
                    build_basis, diffusion_apply, ito_correction,
                    quadratic_variation_integral, sample_increments)
from .storage import (DIAGNOSTIC_COLUMNS, Checkpoint, RunManifest,
                      checkpoint_bytes, collect_outputs, diagnostics_rows,
                      hash_tree, load_checkpoint, load_manifest, load_measure,
                      read_series, save_checkpoint, save_measure, sha256_file,
                      study_point_columns, write_jsonl, write_manifest,
                      write_schema_series, write_series)
from .version import VERSION

__version__ = VERSION
