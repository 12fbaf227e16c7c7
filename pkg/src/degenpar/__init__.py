"""Simulation and verification lab for positive solutions of u_t = ΔF(u)."""
from .errors import (
    AdmissibilityError,
    ConditionViolation,
    DegenerateInputError,
    DegenparError,
    InvalidNonlinearity,
    ParameterError,
    PinchViolation,
    PositivityError,
    ShapeError,
    StepFailure,
    WindowError,
)
from .exact import ExactSolution
from .geometry import Field, ModelGeometry, cutoff_psi, gradient_norm, laplace_beltrami
from .matrix_lemma import bruteforce_sup, extremal_quadratic, jacobi_eigh, supremum_bound, witness
from .nonlinearity import (
    ConditionReport,
    Nonlinearity,
    ValueRange,
    condition_report,
    fde_admissible_range,
    fde_gamma,
    heat_alpha,
    pme_alpha,
    pme_pinch,
)
from .solver import SolverConfig, Trajectory, convergence_study, residual, solve, step
from .estimates import (
    Window,
    bound_ratio_fde,
    bound_ratio_heat_sz,
    bound_ratio_pme_n1,
    bound_ratio_pme_n2,
    bound_ratio_thm11,
    harnack_fields,
    identity_check_g,
    inequality_residual,
    liouville_sweep,
)

__version__ = "0.1.0"
