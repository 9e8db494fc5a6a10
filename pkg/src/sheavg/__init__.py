"""Simulation and verification toolkit for spatial averages of systems of
stochastic heat equations driven by multi-channel space-time white noise."""

from .errors import BlowupError, ConfigError, NumericalError, SingularMatrixError
from .model import DiffusionField, SigmaFamily, check_h1, heat_kernel, kernel_window
from .observables import (AverageSample, EtaCurve, estimate_eta,
                          limit_covariance, prelimit_covariance,
                          spatial_average, two_point_cov)
from .oracles import (VolterraSolution, additive_point_variance,
                      constant_sigma_law, pam_second_moment)
from .malliavin import (PairingSample, SteinEstimate, pairing_bruteforce,
                        pairing_tangent, run_pairings, stein_bound, v_weight)
from .solver import (FieldState, Grid, NoiseStream, TangentState, simulate,
                     step_explicit, step_tangent)
from .stats import (SampleMatrix, SymMatrix, gaussian_gap_bound,
                    gaussian_sample, gaussian_w2, hs_norm, increment_moment,
                    increment_orthogonality, mardia, min_eigen_check, op_norm,
                    rate_fit, sliced_w1, sym_eig)

__version__ = "0.1.0"
