"""Sensitivity analysis and sharp bounds for engagement-indexed treatment effects.

In a two-arm trial where only the intervention arm can engage, the effect
among subjects with potential engagement ``a`` is not identified once the
exclusion restriction is dropped. Fixing the ratio gamma = Delta(0)/Delta(1)
identifies it; sweeping gamma over [0, 1] gives sharp bounds.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import EstimationError, LateBoundsError, ValidationError
from .estimators import IttEstimate, MuHEstimate, estimate_itt, itt_diff_means, itt_ols, mu_h_estimate
from .inference import BootstrapResult, ReportPlan, VarianceBundle, WaldTest, bootstrap, var_c, var_late, wald
from .late import (
    EngagementThreshold,
    LatePoint,
    XiResult,
    bounds,
    c_factor,
    engagement_for_effect_threshold,
    gamma_for_xi_threshold,
    late_estimate,
    late_grid,
    xi,
)
from .model import Adjustment, AnalysisConfig, SplineTerm, TrialDataset, dataset_from_arrays, validate_dataset
from .report import AnalysisReport, analyze, analyze_estimates, read_csv
from .simulate import ScenarioSpec, gen_dataset, load_scenario, monte_carlo, design_scenario, true_itt, true_mu_a
from .transform import TransformSpec

__all__ = [
    "Adjustment",
    "AnalysisConfig",
    "AnalysisReport",
    "BootstrapResult",
    "EngagementThreshold",
    "EstimationError",
    "IttEstimate",
    "LateBoundsError",
    "LatePoint",
    "MuHEstimate",
    "ReportPlan",
    "ScenarioSpec",
    "SplineTerm",
    "TransformSpec",
    "TrialDataset",
    "ValidationError",
    "VarianceBundle",
    "WaldTest",
    "XiResult",
    "analyze",
    "analyze_estimates",
    "bootstrap",
    "bounds",
    "c_factor",
    "dataset_from_arrays",
    "engagement_for_effect_threshold",
    "estimate_itt",
    "gamma_for_xi_threshold",
    "gen_dataset",
    "itt_diff_means",
    "itt_ols",
    "late_estimate",
    "late_grid",
    "load_scenario",
    "monte_carlo",
    "mu_h_estimate",
    "read_csv",
    "design_scenario",
    "true_itt",
    "true_mu_a",
    "validate_dataset",
    "var_c",
    "var_late",
    "wald",
    "xi",
]
