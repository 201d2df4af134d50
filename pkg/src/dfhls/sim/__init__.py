from .engine import (
    DEFAULT_STEP_LIMIT,
    ConcurrentResult,
    DeadlockReport,
    PeTrace,
    SimulationError,
    StepLimitExceeded,
    run_concurrent,
    run_program_concurrent,
    run_reference,
)
from .search import NoFeasibleDepth, min_depths_search
from .tensorio import read_tensor, write_tensor
