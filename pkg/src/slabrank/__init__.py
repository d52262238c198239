"""Low-rank solver for the even-parity radiative transfer equation in slabs.

Preconditioned, soft-thresholded Richardson iteration on factored low-rank
matrices, with Kronecker-structured operators, an exponential-sum
preconditioner for the inverse square root of a Kronecker sum, and benchmark
studies reproducing convergence tables.
"""

from .assembly import (AssembledSystem, CoefficientFunction,
                       DiscretizationSpec, analytic, assemble, assemble_load,
                       constant, piecewise)
from .cases import ManufacturedCase, manufactured_case
from .expsum import (ExpSumApproximation, Preconditioner, expsum_eval,
                     expsum_params, precond_apply, preconditioner_for_system)
from .kron import KronOperator, KronTerm, kron_apply, materialize
from .lowrank import (LowRankMatrix, canonicalize, from_dense, frobenius_norm,
                      rounded_sum, soft_threshold, truncated_svd, zeros)
from .solver import (SolverParams, SolveTrace, TransformedOperator,
                     derived_constants, inexact_constants, richardson_plain,
                     st_solve, st_solve_inexact)
from .study import (ConvergenceRow, back_transform, error_norms,
                    run_convergence_study, solve_case)

__version__ = "0.1.0"
