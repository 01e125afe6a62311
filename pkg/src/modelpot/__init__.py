"""Numerical toolkit for rotationally symmetric model manifolds:
integral classification criteria, radial exhaustion profiles via Picard
iteration, and discrete obstacle-problem constructions of small
supersolutions."""

from .core import (
    DEFAULT_QUADRATURE,
    DomainError,
    K_mu,
    ModelManifold,
    NumericError,
    PhiOperator,
    PotentialB,
    Quadrature,
    QuadratureError,
    ball_volume,
    beta,
    linear_power_potential,
    load_manifold_csv,
    log_sphere_volume,
    manifold_from_tag,
    operator_from_tag,
    p_laplacian_operator,
    perturbed_operator,
    phi_inverse,
    phi_inverse_array,
    plateau_potential,
    potential_from_tag,
    sphere_volume,
    superlinear_potential,
    tabulated_manifold,
    volume_ratio,
    zero_potential,
)
from .criteria import (
    DEFAULT_C_VALUES,
    DEFAULT_DIVERGENCE,
    KO_DIVERGENCE,
    Classification,
    ConsistencyError,
    DivergenceConfig,
    DivergenceVerdict,
    KellerOssermanResult,
    OperatorType,
    OperatorTypeTag,
    PropertyTag,
    Verdict,
    classification_rows,
    classification_text,
    classify_KL,
    classify_operator_type,
    classify_parabolic,
    keller_osserman,
    p_laplacian_criteria,
    test_L1_at_infinity,
    v_pa,
    v_st,
)
from .obstacle import (
    BudgetError,
    ConstraintError,
    DiscreteFunction,
    DiscreteProblem,
    KhasminskiiReport,
    ObstacleSpec,
    SupersolutionCheck,
    SweepLimitError,
    comparison_check,
    is_subsolution,
    is_supersolution,
    khasminskii_construct,
    make_problem,
    pasting_min,
    residual_complementarity,
    solve_dirichlet,
    solve_obstacle,
)
from .radial import (
    BLOWUP,
    COMPLETE,
    CauchyParams,
    EvansFailure,
    EvansResult,
    PicardNoConvergence,
    RadialSolution,
    choose_mu,
    evans_for_triple,
    non_overlap_mu,
    ode_residual,
    solve_cauchy,
    solve_on_interval,
    volterra_apply,
)

__version__ = "0.1.0"
