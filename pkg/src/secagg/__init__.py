"""Information-theoretic two-round secure aggregation with dropouts and collusion."""

from .analyzer import (
    RateReport,
    SessionModel,
    VerificationReport,
    conditional_mi,
    entropy,
    exhaustive_mi_oracle,
    verify_all,
    verify_rates,
    verify_security,
    verify_share_identities,
)
from .dealer import (
    CANONICAL,
    STRUCTURED,
    DealerOutput,
    SessionParams,
    deal,
    dump_dealer_output,
    load_dealer_output,
    randomness_report,
)
from .errors import (
    BudgetExceededError,
    FieldError,
    InfeasibleError,
    MatrixError,
    ParameterError,
    ProtocolError,
    ReuseError,
    ScheduleError,
    SecAggError,
    SingularMatrixError,
)
from .field import FieldSpec, make_field, smallest_field
from .matrix import Matrix, canonical_cauchy, cauchy, rank, solve, submatrix
from .protocol import DropoutSchedule, ServerState, Transcript, run_session, server_decode
from .simulator import ExperimentPlan, enumerate_schedules, run_experiment

__version__ = "0.1.0"
