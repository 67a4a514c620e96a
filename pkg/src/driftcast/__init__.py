"""Online aggregation of windowed ridge experts for piecewise-stationary series.

A new linear expert is fitted on a sliding window at every step; an
exponential-weights aggregator with the square-loss substitution rule
combines all experts built so far, while share-style mixing lets the
weights track generator switches.  The infinite pool of not-yet-built
experts rides along analytically as a prior-proportional tail.
"""

from .distributions import Distribution, log_mix, relative_entropy
from .engine import EngineConfig, Forecaster, InvariantViolation, ProtocolError, StepRecord, run
from .evaluation import (
    CompositeExpert,
    RegretLedger,
    VanishingRegretReport,
    build_ledger,
    composite_bound_exact,
    composite_bound_rhs,
    composite_oracle,
    fixed_share_bound_rhs,
    vanishing_regret_check,
)
from .experts import LinearExpert, init_expert, ridge_fit
from .datagen import (
    GeneratorPool,
    SegmentSchedule,
    default_outcome_range,
    make_pool,
    make_schedule,
    make_stream,
    read_stream_csv,
    sample_pair,
    write_stream_csv,
)
from .losses import OutcomeRange, SquareLoss
from .priors import PriorWeights, prior_constant, prior_weight
from .reference import ReferenceForecaster
from .weights import (
    DecayingShareMixing,
    ExponentialMixing,
    FixedShareMixing,
    GeneralMixing,
    PosteriorHistory,
    WeightState,
    loss_update,
    materialize_expert,
    mixing_update,
    normalized_initialized,
)

__version__ = "0.1.0"
