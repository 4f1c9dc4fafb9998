"""Generalized proximal point algorithm lab.

A small numpy library for the relaxed resolvent iteration
z^{k+1} = z^k - gamma*(z^k - J_{c_k}(z^k)) with gamma in (0, 2), its
relative-error inexact variant, the generalized augmented Lagrangian method
and generalized ADMM it specializes to, and tooling that verifies the
optimal linear convergence factors on analytically solvable problems.
"""

from .operators import (
    AffineOperatorSpec,
    MonotoneOperatorHandle,
    NumericalError,
    PropertyReport,
    RotationOperatorSpec,
    check_firm_nonexpansive,
    make_affine_operator,
    make_rotation_operator,
    representation_decompose,
    resolvent,
)
from .ppa import (
    EquivalenceReport,
    GppaConfig,
    InexactnessSchedule,
    IterationRecord,
    IterationTrace,
    ProximalSchedule,
    residual_stop,
    run_exact_gppa,
    run_inexact_gppa,
    step_exact,
    step_inexact,
)
from .alm import (
    AlmRecord,
    AlmTrace,
    LinearlyConstrainedQP,
    alm_x_subproblem,
    kkt_residual,
    make_dual_alm_operator,
    random_qp,
    run_generalized_alm,
    verify_alm_ppa_equivalence,
)
from .admm import (
    AdmmRecord,
    AdmmTrace,
    PrimalDualEstimate,
    SeparableQP,
    dr_multiplier_projection,
    extract_primal_dual,
    make_dr_splitting_operator,
    random_separable_qp,
    run_generalized_admm,
    solve_separable_kkt,
    verify_admm_dr_correspondence,
)
from .rates import (
    LipschitzEstimate,
    ProbeReport,
    RateReport,
    estimate_empirical_rate,
    estimate_resolvent_lipschitz,
    rotation_step_ratio,
    superlinear_probe,
    theoretical_exact_rate,
    theoretical_inexact_factor,
    tightness_check_rotation,
)

__version__ = "0.1.0"

__all__ = [
    "AffineOperatorSpec",
    "MonotoneOperatorHandle",
    "NumericalError",
    "PropertyReport",
    "RotationOperatorSpec",
    "check_firm_nonexpansive",
    "make_affine_operator",
    "make_rotation_operator",
    "representation_decompose",
    "resolvent",
    "EquivalenceReport",
    "GppaConfig",
    "InexactnessSchedule",
    "IterationRecord",
    "IterationTrace",
    "ProximalSchedule",
    "residual_stop",
    "run_exact_gppa",
    "run_inexact_gppa",
    "step_exact",
    "step_inexact",
    "AlmRecord",
    "AlmTrace",
    "LinearlyConstrainedQP",
    "alm_x_subproblem",
    "kkt_residual",
    "make_dual_alm_operator",
    "random_qp",
    "run_generalized_alm",
    "verify_alm_ppa_equivalence",
    "AdmmRecord",
    "AdmmTrace",
    "PrimalDualEstimate",
    "SeparableQP",
    "dr_multiplier_projection",
    "extract_primal_dual",
    "make_dr_splitting_operator",
    "random_separable_qp",
    "run_generalized_admm",
    "solve_separable_kkt",
    "verify_admm_dr_correspondence",
    "LipschitzEstimate",
    "ProbeReport",
    "RateReport",
    "estimate_empirical_rate",
    "estimate_resolvent_lipschitz",
    "rotation_step_ratio",
    "superlinear_probe",
    "theoretical_exact_rate",
    "theoretical_inexact_factor",
    "tightness_check_rotation",
]
