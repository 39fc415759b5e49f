"""Online prediction with Bayes mixtures and discrete MDL model selection.

The package builds countable weighted classes of conditional models,
runs four one-step predictors over observation streams (posterior
mixture, static best-model, per-outcome re-maximised envelope, and its
normalisation), measures per-step Hellinger/KL/absolute/quadratic
distances to the truth, and Monte Carlo-verifies the cumulative loss
bounds implied by the true model's prior weight.
"""

from .models import (
    ConditionalModel,
    ConstantTable,
    GaussianRegressionModel,
    InputToken,
    LinearMean,
    LookupTable,
    ModelClass,
    ModelClassError,
    ModelInputError,
    NonFiniteValueError,
    TabularClassificationModel,
    build_linear_rational_class,
    log_joint,
    rational_code_length,
    validate_class,
)
from .quadrature import QuadratureError, QuadratureSpec, adaptive_simpson, integrate
from .predictors import (
    PredictiveDensity,
    PredictorState,
    SupportExhaustedError,
    bayes_predict,
    dynamic_predict,
    gaussian_density,
    gaussian_mixture_density,
    mdl_select,
    model_density,
    normalize,
    penalized_sse_select,
    static_predict,
    tabular_density,
    update,
)
from .metrics import (
    LEDGER_COLUMNS,
    LossLedger,
    abs_distance,
    hellinger_sq,
    hellinger_sq_gaussian,
    kl_divergence,
    kl_gaussian,
    quadratic_distance,
)
from .simulate import (
    BoundQuantity,
    BoundReport,
    Corollary2Report,
    FixedCycle,
    GaussianWalk,
    IIDUniform,
    Scenario,
    SimulationError,
    check_corollary2,
    generate_stream,
    monte_carlo,
    run_online,
)
from .charts import render_line_chart
from .classify import (
    CLASS_LEDGER_COLUMNS,
    ClassificationScenario,
    classify_predict,
    enumerate_expected_sums,
    run_classification,
    run_classification_online,
)
from .config import ConfigError, ExperimentConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "BoundQuantity", "BoundReport", "CLASS_LEDGER_COLUMNS",
    "ClassificationScenario", "ConditionalModel", "ConfigError",
    "ConstantTable", "Corollary2Report", "ExperimentConfig", "FixedCycle",
    "GaussianRegressionModel", "GaussianWalk", "IIDUniform", "InputToken",
    "LEDGER_COLUMNS", "LinearMean", "LookupTable", "LossLedger",
    "ModelClass", "ModelClassError", "ModelInputError",
    "NonFiniteValueError", "PredictiveDensity", "PredictorState",
    "QuadratureError", "QuadratureSpec", "Scenario", "SimulationError",
    "SupportExhaustedError", "TabularClassificationModel", "abs_distance",
    "adaptive_simpson", "bayes_predict", "build_linear_rational_class",
    "check_corollary2", "classify_predict", "dynamic_predict",
    "enumerate_expected_sums", "gaussian_density",
    "gaussian_mixture_density", "generate_stream", "hellinger_sq",
    "hellinger_sq_gaussian", "integrate", "kl_divergence", "kl_gaussian",
    "load_config", "log_joint", "mdl_select", "model_density",
    "monte_carlo", "normalize", "penalized_sse_select",
    "quadratic_distance", "rational_code_length", "render_line_chart",
    "run_classification", "run_classification_online", "run_online",
    "static_predict", "tabular_density", "update", "validate_class",
]
