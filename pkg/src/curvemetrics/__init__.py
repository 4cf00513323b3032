"""Inner (Sobolev) and outer (kernel) Riemannian metrics on spaces of closed curves."""
from .core import (Curve, MetricConfig, arc_element, arclength_derivative, circle, ellipse,
                   fourier_resample, polygon_length, resample, sobolev_gram_circle,
                   sobolev_norm_circle, theta_grid)
from .exceptions import (ConditioningWarning, ConfigError, CurveError, CurveMetricsError,
                         GramError, ImmersionError, SamplingError, TrajectoryError)
from .kernel import (CometricGram, SobolevKernel, bessel_k, cometric_apply, gram, kernel_eval,
                     metric_solve)
from .paths import CurvePath, DistanceOptions, DistanceReport
from .inner import InnerMetric, inner_distance, inner_eval, inner_gram, inner_path_energy, norm_equivalence_probe
from .outer import (AmbientField, Demo1DConfig, MomentumPath, demo_discontinuity_1d, lift_field,
                    outer_distance, outer_equivalence_probe, outer_eval, outer_path_energy,
                    projection_identities_check)
from .flows import (ConstantField, FlowResult, PeriodicGridField, act_on_curve, integrate_flow,
                    inverse_flow_check, smooth_Sk)
from .compare import ComparisonReport, ExperimentSpec, bilipschitz_probe, run_comparison, sample_ball

__version__ = "0.1.0"
