"""Cross-validation risk estimation for stable learners.

Resampling schemes as distributions over train/test masks, the generalized
cross-validation estimator, stability profiles for the bundled learners, the
closed-form concentration bounds, and a Monte Carlo harness that certifies
those bounds on synthetic laws with computable generalization error.
"""

from .bounds import (
    SplitRule,
    TailBound,
    delta_heuristic,
    expectation_from_tail,
    generic_stability_tail,
    hoeffding_tail,
    holdout_uniform_tail,
    kutin_strong_tail,
    kutin_weak_tail,
    l1_bound,
    mcdiarmid_tail,
    optimal_split,
    uniform_stability_tail_strong,
    uniform_stability_tail_weak,
    vc_baseline,
)
from .estimation import (
    DiscreteJointLaw,
    ErrorTriple,
    EvalSet,
    GaussianRegressionLaw,
    RiskEstimate,
    SyntheticDistribution,
    TwoClassGaussianLaw,
    cv_estimate,
    error_triple,
    load_learning_set_csv,
    oracle_risk,
    resub_estimate,
)
from .experiments import (
    ConcentrationReport,
    SplitSweepReport,
    StabilityAuditReport,
    default_eps_grid,
    run_concentration,
    run_split_sweep,
    run_stability_audit,
)
from .learners import (
    AdaboostPredictor,
    ConstantPredictor,
    Kernel,
    KnnPredictor,
    LassoPredictor,
    Learner,
    LearningSet,
    LossKind,
    Predictor,
    RegnetPredictor,
    ThresholdPredictor,
    adaboost_learner,
    constant_learner,
    erm_learner,
    eval_loss,
    fit_adaboost,
    fit_erm_finite,
    fit_knn,
    fit_lasso,
    fit_regnet,
    knn_learner,
    lasso_learner,
    regnet_learner,
    stump_base_learner,
)
from .resampling import (
    BinaryVector,
    ResamplingScheme,
    SchemeError,
    SupportTooLargeError,
    WeightedEmpiricalMeasure,
    build_scheme,
    scheme_symmetry_check,
    total_variation,
)
from .stability import (
    StabilityProfile,
    certificate_knn_tail,
    certificate_regnet,
    dist_between,
    estimate_profile,
    survival_at,
)

__version__ = "0.1.0"
