"""Federated learning over energy-harvesting clients: queues, schedulers, local SGD and bounds."""

__version__ = "0.1.0"

from .bounds import (
    BoundParams,
    BoundReport,
    check_trace_against_bound,
    theorem1_bound,
    theorem2_bound,
    uniformity_ratio,
)
from .energy import (
    ArrivalStreams,
    EnergyConfig,
    EnergyState,
    available_clients,
    sample_arrivals,
    update_energy,
)
from .errors import *  # noqa: F401,F403
from .fl import (
    ExperimentRule,
    RoundRecord,
    TheoremRule,
    compute_stepsize,
    local_sgd_round,
    measure_drift,
    run_training,
    simulate_availability,
    validate_stepsize,
)
from .scheduler import (
    Greedy,
    Myopic,
    OracleUniform,
    RoundRobin,
    ScheduleDecision,
    greedy_schedule,
    myopic_schedule,
    oracle_uniform_schedule,
    round_robin_schedule,
    schedule,
)
from .tasks import (
    LogisticTask,
    NoiseProfile,
    QuadraticTask,
    estimate_sigma_sq,
    generate_logistic,
    generate_quadratic,
)
