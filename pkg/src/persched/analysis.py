"""Exact feasibility tests built on schedule periodicity.

Every test here follows the same scheme: simulate a finite prefix of the
unique schedule, check that the jobs released inside a finite window all
meet their deadlines, and (where needed) compare the captured system states
at two boundary instants exactly. "Deadlines met in [a, b)" always means
the jobs *released* in [a, b) meet their deadlines, so each simulation runs
max-deadline units past the window end to observe those deadlines.

Task-level tests renumber tasks by priority first (position 0 = highest);
verdicts report original task indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .engine import Engine, Event, run
from .model import (
    Platform,
    SystemState,
    TaskSystem,
    ValidatedSystem,
    hyperperiod,
    job_arrival,
    validate_task_system,
)
from .policy import EDF, PriorityPolicy, task_priority_order

DEFAULT_EDF_BUDGET = 64


class UnsupportedCombinationError(ValueError):
    """No exact test applies to this system/policy combination."""


def _ceil_to_multiple(value: int, base: int, step: int) -> int:
    """Smallest base + j*step (integer j) that is >= max(base, value)."""
    return max(base, base + -(-(value - base) // step) * step)


def settle_times(ordered: TaskSystem) -> tuple[int, ...]:
    """Per priority rank, the release of that task from which its schedule
    (with everything above it) repeats each hyperperiod.

    Rank 1 settles at its own first release; each later rank settles at its
    first release at or after the previous rank's settle time.
    """
    out: list[int] = []
    for task in ordered.tasks:
        if not out:
            out.append(task.offset)
        else:
            out.append(_ceil_to_multiple(out[-1], task.offset, task.period))
    return tuple(out)


def settle_times_arbitrary(ordered: TaskSystem) -> tuple[int, ...]:
    """Settle times for arbitrary deadlines: one extra prefix-hyperperiod
    per rank, absorbing carried-over jobs."""
    out: list[int] = []
    for i, task in enumerate(ordered.tasks, start=1):
        if not out:
            out.append(task.offset)
        else:
            base = _ceil_to_multiple(out[-1], task.offset, task.period)
            out.append(base + hyperperiod(ordered, i))
    return tuple(out)


def check_start_times(ordered: TaskSystem, settle_last: int) -> tuple[int, ...]:
    """Backward pass: per rank, the release from which deadline checks must
    start; everything released earlier is covered by later windows."""
    n = ordered.n
    out = [0] * n
    out[n - 1] = settle_last
    for i in range(n - 2, -1, -1):
        task = ordered.tasks[i]
        out[i] = task.offset + (out[i + 1] - task.offset) // task.period * task.period
    return tuple(out)


@dataclass(frozen=True)
class PeriodicityBounds:
    """All the window arithmetic for one system under one priority order."""

    order: tuple[int, ...]  # original task indices, highest priority first
    hyperperiod: int
    prefix_hyperperiods: tuple[int, ...]
    settle: tuple[int, ...]  # S, constrained-deadline settle times
    settle_arbitrary: tuple[int, ...]  # Shat, arbitrary-deadline settle times
    check_from: tuple[int, ...]  # X, tightened lower edges of the check window

    def to_json(self) -> dict:
        return {
            "P": self.hyperperiod,
            "order": list(self.order),
            "Pi": list(self.prefix_hyperperiods),
            "S": list(self.settle),
            "Shat": list(self.settle_arbitrary),
            "X": list(self.check_from),
        }


def periodicity_bounds(system: TaskSystem, policy: PriorityPolicy) -> PeriodicityBounds:
    order = task_priority_order(policy, system)
    ordered = system.reordered(order)
    settle = settle_times(ordered)
    return PeriodicityBounds(
        order=order,
        hyperperiod=hyperperiod(ordered),
        prefix_hyperperiods=tuple(hyperperiod(ordered, i) for i in range(1, ordered.n + 1)),
        settle=settle,
        settle_arbitrary=settle_times_arbitrary(ordered),
        check_from=check_start_times(ordered, settle[-1]),
    )


@dataclass(frozen=True)
class Witness:
    """Why a system was judged infeasible."""

    kind: str  # "deadline_miss" | "state_mismatch"
    task_index: int
    instance: int | None = None
    time: int | None = None  # the missed deadline instant
    boundary: tuple[int, int] | None = None  # compared instants on mismatch

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "task": self.task_index}
        if self.instance is not None:
            out["instance"] = self.instance
        if self.time is not None:
            out["time"] = self.time
        if self.boundary is not None:
            out["boundary"] = list(self.boundary)
        return out


@dataclass(frozen=True)
class Verdict:
    """Outcome of one exact test (or of the brute-force oracle)."""

    outcome: str  # "feasible" | "infeasible" | "inconclusive"
    rule: str
    interval: tuple[int, int] | None = None
    witness: Witness | None = None
    bounds: PeriodicityBounds | None = None
    states: tuple[SystemState, SystemState] | None = None
    budget: dict | None = None
    P: int | None = None

    @property
    def feasible(self) -> bool:
        return self.outcome == "feasible"

    @property
    def infeasible(self) -> bool:
        return self.outcome == "infeasible"

    def to_json(self) -> dict:
        out: dict = {"outcome": self.outcome, "theorem": self.rule}
        out["interval"] = list(self.interval) if self.interval else None
        out["witness"] = self.witness.to_json() if self.witness else None
        if self.bounds is not None:
            out["bounds"] = self.bounds.to_json()
        elif self.P is not None:
            out["bounds"] = {"P": self.P}
        else:
            out["bounds"] = None
        if self.states is not None:
            out["states"] = [s.to_json() for s in self.states]
        if self.budget is not None:
            out["budget"] = self.budget
        return out


def _first_counted_miss(
    misses: list[Event],
    system: TaskSystem,
    counts: Callable[[int, int], bool],
) -> Event | None:
    for e in misses:
        release = job_arrival(system.task(e.task_index), e.instance)
        if counts(e.task_index, release):
            return e
    return None


def _miss_witness(e: Event) -> Witness:
    return Witness("deadline_miss", e.task_index, e.instance, e.time)


def _mismatch_witness(
    s_a: SystemState, s_b: SystemState, order: tuple[int, ...], boundary: tuple[int, int]
) -> Witness:
    for idx in order:  # highest priority rank first, per the proofs
        if s_a.task_triple(idx) != s_b.task_triple(idx):
            return Witness("state_mismatch", idx, boundary=boundary)
    raise AssertionError("states differ but no task triple does")


def _require_task_level(policy: PriorityPolicy) -> None:
    if not policy.task_level:
        raise UnsupportedCombinationError(
            f"{policy.describe()} is not a task-level fixed-priority policy"
        )


def fp_test_async_constrained(
    system: TaskSystem,
    platform: Platform,
    policy: PriorityPolicy,
    *,
    use_X: bool = False,
    per_task_windows: bool = False,
) -> Verdict:
    """Exact test for constrained deadlines under a task-level policy.

    Simulates [0, S_n + P] and decides: feasible iff every checked release
    meets its deadline and the states at S_n and S_n + P are identical.
    `use_X` starts the deadline checks at X_1 instead of 0 and
    `per_task_windows` restricts each task's checks to one settled
    prefix-hyperperiod; both are pure check-window refinements, the
    simulated schedule is the same.
    """
    v = validate_task_system(system, platform)
    _require_task_level(policy)
    if v.deadline_class == "arbitrary":
        raise UnsupportedCombinationError(
            "constrained-deadline test called on an arbitrary-deadline system"
        )
    bounds = periodicity_bounds(v.system, policy)
    rank_of = {idx: r for r, idx in enumerate(bounds.order)}
    s_n = bounds.settle[-1]
    P = bounds.hyperperiod
    hi = s_n + P
    x_1 = bounds.check_from[0]

    def counts(task_index: int, release: int) -> bool:
        r = rank_of[task_index]
        lo, window_hi = 0, hi
        if per_task_windows:
            lo = bounds.settle[r]
            window_hi = bounds.settle[r] + bounds.prefix_hyperperiods[r]
        if use_X:
            lo = max(lo, x_1)
        return lo <= release < window_hi

    trace = run(
        v.system, v.platform, policy, hi + v.system.max_deadline,
        record_assignments=False, snapshot_times=(s_n, hi),
        priority_order=bounds.order,
    )
    rule = "async-constrained-boundary-state"
    if use_X:
        rule += "+x"
    if per_task_windows:
        rule += "+per-task"
    miss = _first_counted_miss(trace.misses, v.system, counts)
    states = (trace.snapshots[s_n], trace.snapshots[hi])
    lo_report = x_1 if use_X else 0
    if miss is not None:
        return Verdict("infeasible", rule, (lo_report, hi), _miss_witness(miss), bounds)
    if states[0] != states[1]:
        return Verdict(
            "infeasible", rule, (lo_report, hi),
            _mismatch_witness(states[0], states[1], bounds.order, (s_n, hi)),
            bounds, states,
        )
    return Verdict("feasible", rule, (lo_report, hi), None, bounds, states)


def fp_test_async_arbitrary(
    system: TaskSystem, platform: Platform, policy: PriorityPolicy
) -> Verdict:
    """Exact test for any deadline class under a task-level policy: check
    releases in [0, Shat_n + P) and require matching states at the ends."""
    v = validate_task_system(system, platform)
    _require_task_level(policy)
    bounds = periodicity_bounds(v.system, policy)
    shat_n = bounds.settle_arbitrary[-1]
    P = bounds.hyperperiod
    hi = shat_n + P
    trace = run(
        v.system, v.platform, policy, hi + v.system.max_deadline,
        record_assignments=False, snapshot_times=(shat_n, hi),
        priority_order=bounds.order,
    )
    rule = "async-arbitrary-boundary-state"
    miss = _first_counted_miss(trace.misses, v.system, lambda i, r: 0 <= r < hi)
    states = (trace.snapshots[shat_n], trace.snapshots[hi])
    if miss is not None:
        return Verdict("infeasible", rule, (0, hi), _miss_witness(miss), bounds)
    if states[0] != states[1]:
        return Verdict(
            "infeasible", rule, (0, hi),
            _mismatch_witness(states[0], states[1], bounds.order, (shat_n, hi)),
            bounds, states,
        )
    return Verdict("feasible", rule, (0, hi), None, bounds, states)


def fp_test_sync_constrained(
    system: TaskSystem, platform: Platform, policy: PriorityPolicy
) -> Verdict:
    """Exact test for synchronous constrained systems under any shipped
    (deterministic, memoryless, job-level fixed-priority) policy: one
    hyperperiod of releases decides everything, no state comparison needed.
    """
    v = validate_task_system(system, platform)
    if not v.synchronous:
        raise UnsupportedCombinationError("synchronous test called on an asynchronous system")
    if v.deadline_class == "arbitrary":
        raise UnsupportedCombinationError(
            "constrained-deadline test called on an arbitrary-deadline system"
        )
    P = hyperperiod(v.system)
    order = task_priority_order(policy, v.system) if policy.task_level else None
    bounds = periodicity_bounds(v.system, policy) if policy.task_level else None
    trace = run(
        v.system, v.platform, policy, P + v.system.max_deadline,
        record_assignments=False, snapshot_times=(0, P), priority_order=order,
    )
    rule = "sync-constrained-window"
    miss = _first_counted_miss(trace.misses, v.system, lambda i, r: 0 <= r < P)
    states = (trace.snapshots[0], trace.snapshots[P])
    if miss is not None:
        return Verdict("infeasible", rule, (0, P), _miss_witness(miss), bounds, P=P)
    return Verdict("feasible", rule, (0, P), None, bounds, states, P=P)


def fp_test_sync_arbitrary(
    system: TaskSystem, platform: Platform, policy: PriorityPolicy
) -> Verdict:
    """Exact test for synchronous arbitrary-deadline systems under a
    task-level policy: one hyperperiod of releases, plus identical states
    at 0 and P. A clean window with differing states is still infeasible -
    some task is accumulating backlog; the witness names the highest-priority
    task holding two or more active jobs at P.
    """
    v = validate_task_system(system, platform)
    if not v.synchronous:
        raise UnsupportedCombinationError("synchronous test called on an asynchronous system")
    _require_task_level(policy)
    bounds = periodicity_bounds(v.system, policy)
    P = bounds.hyperperiod
    trace = run(
        v.system, v.platform, policy, P + v.system.max_deadline,
        record_assignments=False, snapshot_times=(0, P),
        priority_order=bounds.order,
    )
    rule = "sync-arbitrary-boundary-state"
    miss = _first_counted_miss(trace.misses, v.system, lambda i, r: 0 <= r < P)
    states = (trace.snapshots[0], trace.snapshots[P])
    if miss is not None:
        return Verdict("infeasible", rule, (0, P), _miss_witness(miss), bounds)
    if states[0] != states[1]:
        witness = None
        for idx in bounds.order:
            if states[1].task_triple(idx)[0] >= 2:
                witness = Witness("state_mismatch", idx, boundary=(0, P))
                break
        if witness is None:
            witness = _mismatch_witness(states[0], states[1], bounds.order, (0, P))
        return Verdict("infeasible", rule, (0, P), witness, bounds, states)
    return Verdict("feasible", rule, (0, P), None, bounds, states)


def edf_test(
    system: TaskSystem,
    platform: Platform,
    hyperperiod_budget: int = DEFAULT_EDF_BUDGET,
) -> Verdict:
    """Exact EDF test for any synchrony and deadline class.

    Simulates hyperperiod by hyperperiod from the largest offset, stopping
    with "infeasible" at the first missed deadline and with "feasible" as
    soon as two consecutive hyperperiod-boundary states match (from there
    the schedule provably cycles). No a-priori bound on when the cycle
    starts exists, so `hyperperiod_budget` caps the number of simulated
    hyperperiods; exhausting it is an explicit "inconclusive".
    """
    if hyperperiod_budget < 1:
        raise ValueError("hyperperiod budget must be >= 1")
    v = validate_task_system(system, platform)
    P = hyperperiod(v.system)
    o_max = v.system.max_offset
    rule = "edf-state-recurrence"
    eng = Engine(v.system, v.platform, EDF, record_assignments=False)
    if not eng.advance_to(o_max, stop_on_miss=True):
        return Verdict("infeasible", rule, (0, eng.now), _miss_witness(eng.misses[0]), P=P)
    s1 = eng.capture()
    if not eng.advance_to(eng.now + P, stop_on_miss=True):
        return Verdict("infeasible", rule, (0, eng.now), _miss_witness(eng.misses[0]), P=P)
    s2 = eng.capture()
    windows = 1
    while s1 != s2:
        if windows >= hyperperiod_budget:
            return Verdict(
                "inconclusive", rule, (0, eng.now), None, None, None,
                {"windows_simulated": windows, "budget": hyperperiod_budget}, P=P,
            )
        s1 = s2
        if not eng.advance_to(eng.now + P, stop_on_miss=True):
            return Verdict("infeasible", rule, (0, eng.now), _miss_witness(eng.misses[0]), P=P)
        s2 = eng.capture()
        windows += 1
    return Verdict("feasible", rule, (eng.now - P, eng.now), None, None, (s1, s2), P=P)


def select_test(
    system: TaskSystem,
    platform: Platform,
    policy: PriorityPolicy,
    *,
    use_X: bool = False,
    per_task_windows: bool = False,
    edf_budget: int = DEFAULT_EDF_BUDGET,
) -> Verdict:
    """Route to the strongest exact test applicable to this combination."""
    v = validate_task_system(system, platform)
    constrained = v.deadline_class != "arbitrary"
    if v.synchronous and constrained:
        return fp_test_sync_constrained(system, platform, policy)
    if policy.kind == "edf":
        return edf_test(system, platform, edf_budget)
    if not policy.task_level:
        raise UnsupportedCombinationError(
            f"no exact test for an asynchronous system under {policy.describe()}"
        )
    if v.synchronous:
        return fp_test_sync_arbitrary(system, platform, policy)
    if constrained:
        return fp_test_async_constrained(
            system, platform, policy, use_X=use_X, per_task_windows=per_task_windows
        )
    return fp_test_async_arbitrary(system, platform, policy)
