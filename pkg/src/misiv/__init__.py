"""Identification, bounds, and inference for binary instrument/treatment/
outcome analyses when one or more of the three variables is misclassified.

The package is organized around a single observed object, the 2x2x2 count
table, and a single latent object, the principal-stratum model. Everything
else is a map between them: exact correction when channel rates are known,
closed-form or numeric bounds when only rate ranges are known, testable
conditions, confidence intervals, and a simulation harness that audits the
bounds end to end.
"""

from .bounds import (
    BoundsReport,
    ConditionReport,
    bounds_outcome_nondiff,
    bounds_outcome_strongmono,
    bounds_treatment_nondiff,
    bounds_treatment_strongmono,
    testable_conditions,
)
from .core import (
    ObservedCounts,
    ObservedDistribution,
    arm_probability,
    from_counts,
    recode_outcome,
    risk_difference,
)
from .errors import (
    DegenerateDenominator,
    DegenerateResample,
    ImplausibleCorrection,
    InfeasibleZChannel,
    MisivError,
    NoFeasiblePoint,
    NonInformativeRates,
    StrongMonoViolated,
    ZeroArm,
    ZeroCorrectedDenominator,
    ZeroDenominator,
)
from .identify import (
    CaceEstimate,
    MultiTreatmentMargins,
    NondiffRates,
    bross_attenuation,
    corrected_cace,
    dichotomize_weight,
    naive_cace,
)
from .inference import (
    AsymptoticVariance,
    CiConfig,
    ConfidenceInterval,
    InequalityTests,
    ci_union,
    ci_wald,
    estimate_variance,
    test_inequalities,
)
from .latentmap import (
    FeasibilityReport,
    LatentIvModel,
    StrongMonoRates,
    check_feasibility,
    forward_map,
    inverse_map,
)
from .numopt import SearchConfig, numeric_bounds
from .sensitivity import (
    DifferentialRates,
    RateBox,
    cace_diff_outcome,
    cace_diff_treatment,
    sensitivity_region,
)
from .sim import (
    AuditRecord,
    AuditReport,
    ScenarioSpec,
    sample_latent,
    sharpness_audit,
    simulate_observed,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "ObservedCounts",
    "ObservedDistribution",
    "arm_probability",
    "from_counts",
    "recode_outcome",
    "risk_difference",
    # identify
    "CaceEstimate",
    "MultiTreatmentMargins",
    "NondiffRates",
    "naive_cace",
    "corrected_cace",
    "bross_attenuation",
    "dichotomize_weight",
    # latentmap
    "LatentIvModel",
    "StrongMonoRates",
    "FeasibilityReport",
    "forward_map",
    "inverse_map",
    "check_feasibility",
    # bounds
    "BoundsReport",
    "ConditionReport",
    "bounds_outcome_nondiff",
    "bounds_treatment_nondiff",
    "bounds_outcome_strongmono",
    "bounds_treatment_strongmono",
    "testable_conditions",
    # numopt
    "SearchConfig",
    "numeric_bounds",
    # sensitivity
    "DifferentialRates",
    "RateBox",
    "cace_diff_outcome",
    "cace_diff_treatment",
    "sensitivity_region",
    # inference
    "CiConfig",
    "AsymptoticVariance",
    "ConfidenceInterval",
    "InequalityTests",
    "estimate_variance",
    "ci_wald",
    "ci_union",
    "test_inequalities",
    # sim
    "ScenarioSpec",
    "AuditRecord",
    "AuditReport",
    "sample_latent",
    "simulate_observed",
    "sharpness_audit",
    # errors
    "MisivError",
    "ZeroArm",
    "ZeroDenominator",
    "NonInformativeRates",
    "DegenerateDenominator",
    "StrongMonoViolated",
    "InfeasibleZChannel",
    "NoFeasiblePoint",
    "ZeroCorrectedDenominator",
    "DegenerateResample",
    "ImplausibleCorrection",
]
