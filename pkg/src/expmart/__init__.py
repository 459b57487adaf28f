"""Exact exponential-martingale operator algebra with Monte Carlo verification."""

from .algebra import (
    CANONICAL_TOL,
    HermiteExpansion,
    NonPolynomialElementError,
    PolyExpElement,
    VarianceMismatchError,
    add,
    apply_D,
    apply_D_star,
    apply_G,
    apply_X,
    commutator_residual,
    conjugate,
    cross_time_inner_product,
    element_from_text,
    element_to_text,
    expectation,
    from_hermite,
    gaussian_expectation,
    hermite_coefficients,
    hermite_element,
    inner_product,
    make_element,
    make_exponential,
    monomial,
    mul,
    norm,
    one_element,
    scale,
    sub,
    to_hermite,
    zero_element,
)
from .config import (
    PRESETS,
    ConfigError,
    RunConfig,
    apply_preset,
    load_ini,
)
from .processes import (
    InvalidTimeChangeError,
    PathEnsemble,
    TimeChange,
    TimeGrid,
    generate,
    quadratic_variation_at,
)
from .verify import (
    CenteringFunction,
    Estimate,
    EvaluationOverflowError,
    InequalityReport,
    IsometryReport,
    ProcessElement,
    evaluate_element,
    energy_integral,
    ito_integral,
    lemma2_case,
    mc_expectation,
    verify_h1,
    verify_h2,
    verify_isometry,
    verify_l2_limit,
    verify_pde,
    weighted_energy_integral,
)

__version__ = "0.1.0"
