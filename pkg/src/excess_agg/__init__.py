"""Online aggregation of expert advice with second-order regret guarantees."""

from .core import (
    ConfidenceVector,
    LearnerConfig,
    LossVector,
    RegretLedger,
    RoundOutcome,
    Run,
    run,
)
from .learners import AdaptMLProd, MLCHedge, MLPoly, MLProd, make_learner
from .confidence import (
    ConfidenceReduction,
    ConvexLossOracle,
    GradientTrick,
    check_gradient,
    linearize,
)
from .bounds import BoundReport, bound_iid, solve_quadratic
from .sim import GeneratorSpec, generate, generate_rounds
from .errors import (
    AggregationError,
    ConfigMismatch,
    EmptyActiveSet,
    GradientBoundViolated,
    LossOutOfRange,
    RateOutOfRange,
    StaleRound,
)

__version__ = "0.1.0"
