"""Exact feasibility analysis for periodic tasks under global preemptive
scheduling on identical, uniform, or unrelated multiprocessors.

The package decides schedulability *exactly* by simulating the unique
schedule of a deterministic, memoryless, work-conserving scheduler over a
provably sufficient finite window and comparing system states at
hyperperiod boundaries. A brute-force state-recurrence oracle and a set of
lemma checkers validate every exact test.
"""

from .analysis import (
    DEFAULT_EDF_BUDGET,
    PeriodicityBounds,
    UnsupportedCombinationError,
    Verdict,
    Witness,
    check_start_times,
    edf_test,
    fp_test_async_arbitrary,
    fp_test_async_constrained,
    fp_test_sync_arbitrary,
    fp_test_sync_constrained,
    periodicity_bounds,
    select_test,
    settle_times,
    settle_times_arbitrary,
)
from .engine import (
    Engine,
    Event,
    StepBudgetError,
    Trace,
    availability,
    dispatch,
    run,
    run_jobs,
)
from .fileio import (
    FileFormatError,
    LoadedSystem,
    dumps_job_set,
    dumps_task_system,
    load_job_set,
    load_task_system,
    loads_job_set,
    loads_task_system,
)
from .model import (
    PENDING,
    Job,
    Platform,
    SystemState,
    Task,
    TaskSystem,
    ValidatedSystem,
    ValidationError,
    hyperperiod,
    identical_platform,
    job_arrival,
    job_of,
    make_system,
    processor_order_for_task,
    state_bound_violations,
    validate_task_system,
)
from .policy import (
    DM,
    EDF,
    RM,
    PriorityPolicy,
    compare_jobs,
    explicit_order,
    task_priority_order,
)
from .verify import (
    CheckOutcome,
    Instance,
    JobSetSpec,
    JobSpec,
    StartFinishReport,
    availability_subset_check,
    brute_force_feasibility,
    check_schedule_periodicity,
    execution_monotonicity_check,
    generate_instance,
    generate_job_set,
    predictability_harness,
    run_campaign,
    run_instance_checks,
    shrink_instance,
    state_order_check,
)

__version__ = "0.1.0"
