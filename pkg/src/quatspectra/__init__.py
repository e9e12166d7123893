"""Quaternion self-dual Hermitian random matrices and their spectra.

The package covers four layers:

* :mod:`quatspectra.quaternion`: exact quaternion arithmetic and the 2x2
  complex embedding;
* :mod:`quatspectra.structure`: Type-T/Type-I/Type-II block-matrix
  predicates, Schur-complement inversion, and the randomized check that
  invertible Type-II matrices invert to Type-I;
* :mod:`quatspectra.ensemble`: ensemble sampling under the moment
  conditions (GSE and beyond) and the truncate / zero-diagonal / centralize
  / rescale pipeline with its rank and Levy diagnostics;
* :mod:`quatspectra.spectra`: eigenvalues with pair deduplication, ESDs,
  the semicircular reference law, Stieltjes transforms and resolvent
  structure checks.

:mod:`quatspectra.experiment` drives reproducible Monte Carlo sweeps; the
``quatspectra`` console script exposes ``sample``, ``sweep``, ``verify`` and
``pipeline`` subcommands.
"""

from .quaternion import (I1, I2, I3, UNIT, Quaternion, ShapeError, conjugate,
                         from_complex, multiply, norm, to_complex)
from .structure import (BlockMatrix, DecompositionError, InversionCheckReport,
                        SingularError, StructureReport, classify, d_related,
                        is_type_t, make_type2, schur_block_inverse,
                        u_related, verify_type2_inverse)
from .ensemble import (EnsembleSpec, EtaSchedule, GSECoefficients,
                       PipelineTrace, RademacherCoefficients, SelfDualMatrix,
                       SpecError, TwoPointCoefficients, UniformCoefficients,
                       UserCoefficients, centralize, lindeberg_statistic,
                       rescale, run_pipeline, sample_general, sample_gse,
                       truncate, zero_diagonal)
from .spectra import (ESD, DomainError, NotHermitianError, PairingError,
                      SpectralSample, StieltjesPoint, dedup_pairs, embed,
                      empirical_stieltjes, hermitian_eigenvalues,
                      kolmogorov_distance, levy_distance, resolvent,
                      resolvent_structure_check, semicircle_cdf,
                      semicircle_pdf, semicircle_stieltjes, trace_minor_check)
from .experiment import (ConfigError, ConvergenceRow, ExperimentConfig, emit,
                         run, trial_seed, verify)

__version__ = "0.1.0"
