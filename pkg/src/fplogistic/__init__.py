"""Nonlocal logistic equations: assembly, solvers, and verification.

The package discretizes the degenerate nonlocal p-Laplacian with exterior
zero condition on interval and rectangle domains by piecewise-constant cell
functions, for which the singular double integral has closed-form and
adaptively reduced weights.  On top of the assembled weights it provides
the principal eigenpair, descent solvers for the logistic energy in the
subdiffusive, equidiffusive, and superdiffusive regimes, detection of the
existence threshold, a saddle search for the second solution, and
structural verification checks.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .domain import (DomainSpec, Grid, GridError, ParamError, ProblemParams,
                     Regime, build_grid, classify_regime, validate_params)
from .eigen import EigenError, EigenOptions, EigenPair, principal_eigenpair
from .kernel import (KernelError, KernelWeights, assemble, load_weights,
                     save_weights)
from .logistic import (LogisticParams, TruncKind, TruncatedReaction,
                       energy_phi, grad_phi, phi_functional,
                       torsion_functional, truncated_functional)
from .operator import (DiscreteFunction, GridMismatchError, apply_operator,
                       gagliardo_energy, lp_norm, signed_power)
from .solve import (BranchPoint, MountainPassOptions, SolveOptions,
                    SolveReport, SolverError, Status, ThresholdReport,
                    detect_threshold, lower_bound_lambda0, minimize,
                    mountain_pass, solve_branch_point, torsion_solve)
from .verify import (CheckResult, check_hopf, check_limit_branch,
                     check_nonexistence_equi, check_strict_order,
                     refinement_study, run_suite)

__all__ = [
    "__version__",
    "DomainSpec", "Grid", "GridError", "ParamError", "ProblemParams",
    "Regime", "build_grid", "classify_regime", "validate_params",
    "EigenError", "EigenOptions", "EigenPair", "principal_eigenpair",
    "KernelError", "KernelWeights", "assemble", "load_weights", "save_weights",
    "LogisticParams", "TruncKind", "TruncatedReaction", "energy_phi",
    "grad_phi", "phi_functional", "torsion_functional", "truncated_functional",
    "DiscreteFunction", "GridMismatchError", "apply_operator",
    "gagliardo_energy", "lp_norm", "signed_power",
    "BranchPoint", "MountainPassOptions", "SolveOptions", "SolveReport",
    "SolverError", "Status", "ThresholdReport", "detect_threshold",
    "lower_bound_lambda0", "minimize", "mountain_pass", "solve_branch_point",
    "torsion_solve",
    "CheckResult", "check_hopf", "check_limit_branch",
    "check_nonexistence_equi", "check_strict_order", "refinement_study",
    "run_suite",
]
