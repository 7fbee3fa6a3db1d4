"""Nuclear-norm penalized risk minimization over symmetric matrices,
plus an empirical verification harness for sharp low-rank oracle bounds."""

from .bounds import (
    BoundReport,
    ConstantsConfig,
    RademacherStats,
    adjusted_confidence,
    compatibility_basis,
    compatibility_lower_bound,
    design_moment_bounds,
    enumerate_rademacher_norm_fixed,
    epsilon_threshold,
    estimate_rademacher_norm,
    estimate_rademacher_norm_fixed,
    matrix_bernstein_bound,
    oracle_bound_report,
    residual_scale,
    sample_rademacher_averages,
)
from .constraints import FrobeniusBall, OperatorNormBall, Unconstrained
from .designs import (
    ClassificationLink,
    Dataset,
    DesignDistribution,
    GaussianNoise,
    TruthModel,
    bayes_risk_per_atom,
    custom_design,
    excess_risk,
    functional_l2_norm,
    load_dataset,
    orthonormal_basis_design,
    population_risk,
    prediction_bound,
    response_domain,
    sample_dataset,
    save_dataset,
)
from .errors import NumericalError, ValidationError
from .harness import (
    DEFAULT_SEED,
    ExperimentConfig,
    RankSweepResult,
    SharpnessResult,
    SummaryReport,
    TrialRecord,
    epsilon_sweep,
    mix_seed,
    rank_sweep,
    read_trials_csv,
    resolve_plan,
    run_oracle_trials,
    sharpness_experiment,
    validate_summary,
    write_outputs,
)
from .losses import (
    FiniteSet,
    Interval,
    LossConstants,
    LossModel,
    curvature_lower_bound_check,
    exponential_loss,
    get_loss,
    loss_constants,
    q_value,
    register_loss,
    squared_loss,
)
from .matrices import (
    SpectralDecomposition,
    SupportProjector,
    best_rank_approximation,
    cone_gap,
    frobenius_norm,
    load_matrix,
    nuclear_norm,
    operator_norm,
    project_support,
    project_support_complement,
    prox_nuclear,
    rank_at_tol,
    save_matrix,
    sign_and_support,
    spectral_decompose,
    subdifferential_residuals,
)
from .solver import (
    SolveResult,
    SolverConfig,
    certify,
    composite_prox,
    empirical_risk,
    gradient,
    objective,
    optimality_residuals,
    solve,
)

__version__ = "0.1.0"
