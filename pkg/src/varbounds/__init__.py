"""Matrix variance bounds for Integrated Pearson and Cumulative Ord families.

The library certifies two families of inequalities, in the Loewner ordering,
for the covariance matrix D of a vector of test functions of one random
variable: alternating upper/lower bounds built from weighted derivative Gram
matrices, and a lower bound built from rank-one matrices of weighted mean
derivatives.  Eigenvalue checks, quadratic inference from the families'
defining identities, and a seeded Monte Carlo cross-check round out the
toolkit.
"""

from .bounds import (BoundReport, ClassReport, TermWeight, bessel_coefficient,
                     bound_report, check_class, dispersion_matrix, matrix_A,
                     matrix_B, matrix_H, matrix_L, matrix_S,
                     poincare_coefficient, q_power_expectation)
from .calculus import (FunctionTuple, SmoothFunction, derivative_value,
                       forward_difference, load_function_tuple, parse_function,
                       polynomial, rising_q)
from .distributions import (ContinuousIP, DiscreteCO, InferredQuadratic,
                            MembershipReport, Quadratic, catalog,
                            infer_quadratic, load_distribution,
                            moment_finiteness, spec_to_json, verify_membership)
from .errors import (BracketCeilingError, ClassMembershipError,
                     InvalidParameterError, NoSamplerError,
                     NonFiniteIntegrandError, RankDeficientFitError,
                     SingularCoefficientError, TruncationError,
                     UnknownDistributionError, VarboundsError)
from .expectation import (EngineConfig, ExpectationResult, expect,
                          expect_continuous, expect_discrete, expect_mc,
                          sample, splitmix64_uniforms)
from .linalg import (PsdVerdict, SymMatrix, is_psd, jacobi_eigenvalues,
                     loewner_leq, spectral_radius)

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "ClassReport", "TermWeight", "bessel_coefficient",
    "bound_report", "check_class", "dispersion_matrix", "matrix_A", "matrix_B",
    "matrix_H", "matrix_L", "matrix_S", "poincare_coefficient",
    "q_power_expectation",
    "FunctionTuple", "SmoothFunction", "derivative_value", "forward_difference",
    "load_function_tuple", "parse_function", "polynomial", "rising_q",
    "ContinuousIP", "DiscreteCO", "InferredQuadratic", "MembershipReport",
    "Quadratic", "catalog", "infer_quadratic", "load_distribution",
    "moment_finiteness", "spec_to_json", "verify_membership",
    "BracketCeilingError", "ClassMembershipError", "InvalidParameterError",
    "NoSamplerError", "NonFiniteIntegrandError", "RankDeficientFitError",
    "SingularCoefficientError", "TruncationError", "UnknownDistributionError",
    "VarboundsError",
    "EngineConfig", "ExpectationResult", "expect", "expect_continuous",
    "expect_discrete", "expect_mc", "sample", "splitmix64_uniforms",
    "PsdVerdict", "SymMatrix", "is_psd", "jacobi_eigenvalues", "loewner_leq",
    "spectral_radius",
]
