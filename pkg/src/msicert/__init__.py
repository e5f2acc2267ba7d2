"""Data-driven certification of maximum sampling intervals for sampled-data control.

Given noisy input/state/derivative samples of an unknown continuous-time LTI
plant, this package characterizes every plant consistent with the data and a
quadratic disturbance bound, certifies robust lower bounds on the maximum
sampling interval (MSI) of a state-feedback loop by semidefinite feasibility,
and synthesizes gains that enlarge the certified bound.
"""

from .consistency import (ConsistencySet, DataSet, DualizationError, NoiseBound,
                          build_consistency_set, check_assumption_inertia,
                          check_inertia_sufficient_conditions, dualize,
                          membership_test, primal_membership_test, undualize)
from .derivatives import (DerivEstimate, NormPrior, bounds_to_noise_model,
                          derivative_error_bound, estimate_derivatives,
                          euler_derivative)
from .lmi import (AnalysisCertificate, DesignCertificate, LmiConstraint,
                  LmiProblem, assemble_analysis, assemble_design,
                  assemble_model_based, default_margin)
from .search import (BisectionConfig, IterationSchedule, NoCertificateError,
                     analyze_msi, design_iterate, msi_bisection)
from .solver import (FeasibilityResult, FeasibilityStatus, solve_feasibility)
from .system import (FeedbackGain, LtiSystem, SamplingSequence, Trajectory,
                     ball_disturbance, discretize_zoh, generate_experiment_data,
                     sampled_loop_final_state, simulate_sampled_closed_loop,
                     uniform_interval_inputs, zero_disturbance, zoh_step)

__version__ = "0.1.0"

__all__ = [
    "AnalysisCertificate", "BisectionConfig", "ConsistencySet", "DataSet",
    "DerivEstimate", "DesignCertificate", "DualizationError", "FeasibilityResult",
    "FeasibilityStatus", "FeedbackGain", "IterationSchedule", "LmiConstraint",
    "LmiProblem", "LtiSystem", "NoCertificateError", "NoiseBound", "NormPrior",
    "SamplingSequence", "Trajectory", "analyze_msi", "assemble_analysis",
    "assemble_design", "assemble_model_based", "ball_disturbance",
    "bounds_to_noise_model", "build_consistency_set", "check_assumption_inertia",
    "check_inertia_sufficient_conditions", "default_margin",
    "derivative_error_bound", "design_iterate", "discretize_zoh", "dualize",
    "estimate_derivatives", "euler_derivative", "generate_experiment_data",
    "membership_test", "msi_bisection", "primal_membership_test",
    "sampled_loop_final_state", "simulate_sampled_closed_loop",
    "solve_feasibility", "undualize", "uniform_interval_inputs",
    "zero_disturbance", "zoh_step",
]
