"""Bilinear control of truncated parabolic systems to the ground state solution."""

from ._kernels import BACKEND_NAME
from .constants import ConstantsConfig, lambda_T, c_alpha, stage_schedule, theoretical_constants
from .controls import PiecewiseControl, StageControl
from .errors import (AdmissibilityViolated, ConeViolated, ConfigError, ContractionFailure,
                     ControlFailure, DegenerateSequence, GroundCtlError, HypothesisViolation,
                     NumericalFailure, ParseError, StripViolated)
from .moments import PrecisionConfig, biorthogonal_family, gram_matrix, moment_residual
from .spectral import (SpectralModel, build_model, load_custom_spectral,
                       verify_spectral_hypotheses)
from .simulate import shift_spectrum, simulate_bilinear, simulate_linearized
from .synthesis import (ControlConfig, calibrate_r1, run_cone_control, run_local_control,
                        run_strip_control, synthesize_stage_control)
from .verification import (contraction_exponents, fit_run, verify_gm_bound, verify_run,
                           verify_series_identities)

__version__ = "0.1.0"
