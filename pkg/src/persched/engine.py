"""Deterministic discrete-time simulator for global preemptive scheduling.

One step per integer time unit: the active queue heads (one candidate job
per task, FIFO within the task) are offered to the dispatcher in priority
order, each takes the fastest eligible processor still free, assigned jobs
earn rate x 1 units of work, and completions/misses/arrivals are processed
at the next instant. All work accounting is done in integers after scaling
every rate and requirement by the common denominator, so runs are exact and
bit-reproducible.

A job that misses its deadline stays in its queue until it completes: a
job is active from release to completion. Post-miss schedules are still
deterministic, but the state-component bounds of `model.SystemState` are
only guaranteed while no deadline has been missed.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

from .model import (
    PENDING,
    Job,
    Platform,
    SystemState,
    TaskSystem,
    processor_order_for_task,
)
from .policy import PriorityPolicy, job_key_fn

JobRef = tuple[int, int]  # (task index, instance), both 1-based


class Event(NamedTuple):
    time: int
    kind: str  # "arrival" | "completion" | "deadline_miss"
    task_index: int
    instance: int

    def ref(self) -> JobRef:
        return (self.task_index, self.instance)


class StepBudgetError(RuntimeError):
    """A predicate-driven run ran out of steps before the predicate held."""


def availability(assignment: Sequence[JobRef | None]) -> frozenset[int]:
    """Idle processor indices (1-based) of one instant's assignment."""
    return frozenset(j + 1 for j, entry in enumerate(assignment) if entry is None)


@dataclass
class Trace:
    """Recorded schedule over [start, end).

    assignments[t - start] is the per-processor vector at instant t: None
    for an idle processor, else the (task, instance) pair it serves. Events
    are time-ordered; snapshots map instants to captured system states.
    Task indices are the original ones even when the run was driven by a
    renumbering policy; `priority_order` records that permutation.
    """

    start: int
    end: int
    assignments: list[tuple[JobRef | None, ...]]
    events: list[Event]
    snapshots: dict[int, SystemState] = field(default_factory=dict)
    priority_order: tuple[int, ...] | None = None

    def assignment_at(self, t: int) -> tuple[JobRef | None, ...]:
        if not self.start <= t < self.start + len(self.assignments):
            raise IndexError(f"no assignment recorded for t={t}")
        return self.assignments[t - self.start]

    def tasks_at(self, t: int) -> tuple[int, ...]:
        """Per-processor task indices at t (0 = idle), the sigma vector."""
        return tuple(ref[0] if ref else 0 for ref in self.assignment_at(t))

    @property
    def misses(self) -> list[Event]:
        return [e for e in self.events if e.kind == "deadline_miss"]

    def first_miss(self) -> Event | None:
        for e in self.events:
            if e.kind == "deadline_miss":
                return e
        return None

    def to_text(self) -> str:
        """Stable line-oriented form: `t | p1:<job> p2:<job> | events`.

        Jobs print as task.instance, idle processors as `-`. A final
        `end` line carries events raised at the end boundary.
        """
        lines = []
        if self.priority_order:
            lines.append("# priority-order: " + ",".join(map(str, self.priority_order)))
        by_time: dict[int, list[Event]] = {}
        for e in self.events:
            by_time.setdefault(e.time, []).append(e)
        for t in range(self.start, self.start + len(self.assignments)):
            cells = " ".join(
                f"p{j + 1}:" + (f"{ref[0]}.{ref[1]}" if ref else "-")
                for j, ref in enumerate(self.assignment_at(t))
            )
            evs = " ".join(f"{e.kind}:{e.task_index}.{e.instance}" for e in by_time.get(t, ()))
            lines.append(f"{t} | {cells} | {evs}".rstrip())
        tail = " ".join(f"{e.kind}:{e.task_index}.{e.instance}" for e in by_time.get(self.end, ()))
        if tail:
            lines.append(f"{self.end} | end | {tail}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "priority_order": list(self.priority_order) if self.priority_order else None,
            "assignments": [
                [list(ref) if ref else None for ref in row] for row in self.assignments
            ],
            "events": [
                {"time": e.time, "kind": e.kind, "task": e.task_index, "instance": e.instance}
                for e in self.events
            ],
            "snapshots": {str(t): s.to_json() for t, s in sorted(self.snapshots.items())},
        }


class _ActiveJob:
    __slots__ = ("task_index", "instance", "arrival", "absolute_deadline", "req", "done", "key")

    def __init__(self, task_index, instance, arrival, absolute_deadline, req):
        self.task_index = task_index
        self.instance = instance
        self.arrival = arrival
        self.absolute_deadline = absolute_deadline
        self.req = req  # scaled integer work units
        self.done = 0
        self.key = None

    def ref(self) -> JobRef:
        return (self.task_index, self.instance)


class Engine:
    """Incremental stepper for one periodic system on one platform.

    Mutable and single-threaded; independent instances share nothing.
    Construct either at the origin (time 0, nothing released) or from a
    previously captured state, which resumes the very same schedule because
    the shipped policies are memoryless.
    """

    def __init__(
        self,
        system: TaskSystem,
        platform: Platform,
        policy: PriorityPolicy,
        *,
        start_time: int = 0,
        start_state: SystemState | None = None,
        record_assignments: bool = True,
    ):
        self.system = system
        self.platform = platform
        self.policy = policy
        n = system.n
        dens = [r.denominator for row in platform.rates for r in row]
        self.scale = math.lcm(*dens) if dens else 1
        self._rate = [
            [int(r * self.scale) for r in row] for row in platform.rates
        ]
        self._req = [t.wcet * self.scale for t in system.tasks]
        self._proc_order = [
            tuple(j - 1 for j in processor_order_for_task(platform, i))
            for i in range(1, n + 1)
        ]
        self._key_of = job_key_fn(policy, system)
        self._queues: list[deque[_ActiveJob]] = [deque() for _ in range(n)]
        self._next_instance = [1] * n
        self._next_arrival = [t.offset for t in system.tasks]
        self.events: list[Event] = []
        self.misses: list[Event] = []
        self._record = record_assignments
        self.assignments: list[tuple[JobRef | None, ...]] = []

        if start_state is None:
            if start_time != 0:
                raise ValueError("a run without a resume state starts at time 0")
            self.now = 0
        else:
            self.now = start_time
            self._load_state(start_state)
        self.start = self.now
        self._admit_arrivals()

    # -- construction helpers -------------------------------------------------

    def _load_state(self, state: SystemState) -> None:
        t = self.now
        if len(state.triples) != self.system.n:
            raise ValueError("state does not match the task system")
        for i0, (task, (tag, t2, t3)) in enumerate(zip(self.system.tasks, state.triples)):
            if tag == PENDING:
                if task.offset - t != t2 or t2 <= 0:
                    raise ValueError(f"task {task.index}: pending state inconsistent at t={t}")
                continue
            if t < task.offset:
                raise ValueError(f"task {task.index}: released state before its offset")
            if tag == 0:
                if t2 != (t - task.offset) % task.period or t3 != 0:
                    raise ValueError(f"task {task.index}: idle state inconsistent at t={t}")
                last = t - t2
                self._next_arrival[i0] = last + task.period
                self._next_instance[i0] = (last - task.offset) // task.period + 2
                continue
            oldest_arrival = t - t2
            if oldest_arrival < task.offset or (oldest_arrival - task.offset) % task.period != 0:
                raise ValueError(f"task {task.index}: oldest-job arrival {oldest_arrival} off the release grid")
            newest = oldest_arrival + (tag - 1) * task.period
            if not newest <= t < newest + task.period:
                raise ValueError(f"task {task.index}: active-job count {tag} inconsistent with t2={t2}")
            done = t3 * self.scale
            if done.denominator != 1:
                raise ValueError(f"task {task.index}: executed amount {t3} not representable")
            if not 0 <= done < self._req[i0]:
                raise ValueError(f"task {task.index}: executed amount {t3} outside [0, wcet)")
            k0 = (oldest_arrival - task.offset) // task.period + 1
            for j in range(tag):
                job = _ActiveJob(
                    task.index,
                    k0 + j,
                    oldest_arrival + j * task.period,
                    oldest_arrival + j * task.period + task.deadline,
                    self._req[i0],
                )
                if j == 0:
                    job.done = int(done)
                job.key = self._key_of(job)
                self._queues[i0].append(job)
            self._next_instance[i0] = k0 + tag
            self._next_arrival[i0] = oldest_arrival + tag * task.period

    # -- stepping -------------------------------------------------------------

    def _admit_arrivals(self) -> None:
        t = self.now
        for i0, task in enumerate(self.system.tasks):
            if self._next_arrival[i0] == t:
                k = self._next_instance[i0]
                job = _ActiveJob(task.index, k, t, t + task.deadline, self._req[i0])
                job.key = self._key_of(job)
                self._queues[i0].append(job)
                self.events.append(Event(t, "arrival", task.index, k))
                self._next_instance[i0] = k + 1
                self._next_arrival[i0] = t + task.period

    def dispatch_now(self) -> list[_ActiveJob | None]:
        """Greedy work-conserving assignment for the current instant."""
        heads = [q[0] for q in self._queues if q]
        heads.sort(key=lambda job: job.key)
        slots: list[_ActiveJob | None] = [None] * self.platform.m
        free = [True] * self.platform.m
        for job in heads:
            for p in self._proc_order[job.task_index - 1]:
                if free[p]:
                    free[p] = False
                    slots[p] = job
                    break
        return slots

    def step(self) -> None:
        """Advance one time unit: schedule sigma(now), account, roll events."""
        slots = self.dispatch_now()
        if self._record:
            self.assignments.append(
                tuple(job.ref() if job else None for job in slots)
            )
        for p, job in enumerate(slots):
            if job is not None:
                job.done += self._rate[job.task_index - 1][p]
        self.now += 1
        t = self.now
        for q in self._queues:
            if q and q[0].done >= q[0].req:
                job = q.popleft()
                self.events.append(Event(t, "completion", job.task_index, job.instance))
        for q in self._queues:
            for job in q:
                if job.absolute_deadline > t:
                    break
                if job.absolute_deadline == t:
                    ev = Event(t, "deadline_miss", job.task_index, job.instance)
                    self.events.append(ev)
                    self.misses.append(ev)
        self._admit_arrivals()

    def advance_to(self, t: int, *, stop_on_miss: bool = False) -> bool:
        """Step until `now` reaches t; False if stopped early on a miss."""
        while self.now < t:
            self.step()
            if stop_on_miss and self.misses:
                return False
        return True

    # -- observation ----------------------------------------------------------

    def capture(self) -> SystemState:
        """The per-task state triple vector at the current instant."""
        t = self.now
        triples = []
        for task, q in zip(self.system.tasks, self._queues):
            if t < task.offset:
                triples.append((PENDING, task.offset - t, Fraction(0)))
            elif q:
                head = q[0]
                triples.append((len(q), t - head.arrival, Fraction(head.done, self.scale)))
            else:
                triples.append((0, (t - task.offset) % task.period, Fraction(0)))
        return SystemState(tuple(triples))

    def active_jobs(self) -> list[Job]:
        """Current active jobs as public Job values (FIFO order per task)."""
        out = []
        for i0, q in enumerate(self._queues):
            for j in q:
                out.append(
                    Job(j.task_index, j.instance, j.arrival, j.absolute_deadline,
                        Fraction(j.req, self.scale))
                )
        return out

    def trace(self, snapshots: dict[int, SystemState] | None = None,
              priority_order: tuple[int, ...] | None = None) -> Trace:
        return Trace(
            start=self.start,
            end=self.now,
            assignments=self.assignments,
            events=list(self.events),
            snapshots=snapshots or {},
            priority_order=priority_order,
        )


def dispatch(
    jobs: Sequence[Job],
    platform: Platform,
    policy: PriorityPolicy,
    system: TaskSystem,
) -> tuple[JobRef | None, ...]:
    """One instant's greedy assignment for an explicit set of active jobs.

    Only the FIFO-eldest job of each task competes (a task never runs on
    two processors at once); each job in priority order takes its fastest
    eligible processor among those still free, or waits if none remains.
    """
    key = job_key_fn(policy, system)
    eldest: dict[int, Job] = {}
    for job in jobs:
        cur = eldest.get(job.task_index)
        if cur is None or job.instance < cur.instance:
            eldest[job.task_index] = job
    ordered = sorted(eldest.values(), key=key)
    slots: list[JobRef | None] = [None] * platform.m
    free = [True] * platform.m
    for job in ordered:
        for p1 in processor_order_for_task(platform, job.task_index):
            if free[p1 - 1]:
                free[p1 - 1] = False
                slots[p1 - 1] = job.identity
                break
    return tuple(slots)


def run(
    system: TaskSystem,
    platform: Platform,
    policy: PriorityPolicy,
    until: int | Callable[[Engine], bool],
    *,
    start_state: SystemState | None = None,
    start_time: int = 0,
    stop_on_miss: bool = False,
    record_assignments: bool = True,
    snapshot_times: Sequence[int] = (),
    snapshot_every: int | None = None,
    max_steps: int | None = None,
    priority_order: tuple[int, ...] | None = None,
) -> Trace:
    """Drive an Engine and return the recorded Trace.

    `until` is either an exclusive integer horizon (assignments cover
    [start, until)) or a predicate over the engine, in which case
    `max_steps` bounds the run and `StepBudgetError` signals exhaustion
    (a budget error, deliberately distinct from an infeasibility verdict).
    Snapshots are captured at the requested instants (and every
    `snapshot_every` units when given), including the final instant.
    """
    eng = Engine(
        system,
        platform,
        policy,
        start_time=start_time,
        start_state=start_state,
        record_assignments=record_assignments,
    )
    snaps: dict[int, SystemState] = {}
    wanted = set(snapshot_times)

    def maybe_snapshot():
        t = eng.now
        if t in wanted or (snapshot_every and (t - eng.start) % snapshot_every == 0):
            snaps[t] = eng.capture()

    maybe_snapshot()
    if callable(until):
        steps = 0
        while not until(eng):
            if max_steps is not None and steps >= max_steps:
                raise StepBudgetError(f"predicate still false after {steps} steps")
            eng.step()
            steps += 1
            maybe_snapshot()
            if stop_on_miss and eng.misses:
                break
    else:
        if until <= eng.start:
            raise ValueError(f"horizon {until} must lie beyond start {eng.start}")
        while eng.now < until:
            eng.step()
            maybe_snapshot()
            if stop_on_miss and eng.misses:
                break
    return eng.trace(snapshots=snaps, priority_order=priority_order)


# -- finite job sets ----------------------------------------------------------


class JobEvent(NamedTuple):
    time: int
    kind: str
    job: int  # 1-based position in the priority-ordered job list


@dataclass
class JobsTrace:
    """Schedule of a finite, priority-ordered job set over [0, end)."""

    m: int
    end: int
    assignments: list[tuple[int | None, ...]]
    events: list[JobEvent]
    started: dict[int, int]
    finished: dict[int, int]

    @property
    def misses(self) -> list[JobEvent]:
        return [e for e in self.events if e.kind == "deadline_miss"]

    def idle_processors(self, t: int) -> frozenset[int]:
        if t >= self.end:
            return frozenset(range(1, self.m + 1))
        return frozenset(j + 1 for j, entry in enumerate(self.assignments[t]) if entry is None)


def run_jobs(
    jobs: Sequence[tuple[int, Fraction, int, tuple[Fraction, ...]]],
    m: int,
    *,
    record_assignments: bool = True,
    horizon: int | None = None,
) -> JobsTrace:
    """Schedule a finite job set, highest priority first in list order.

    Each job is (release, requirement, deadline, per-processor rates). The
    run ends when every job has completed; `horizon` only caps runaway
    inputs (a job with no positive rate is rejected instead).
    """
    n = len(jobs)
    dens = [e.denominator for (_, e, _, _) in jobs]
    dens += [r.denominator for (_, _, _, row) in jobs for r in row]
    scale = math.lcm(*dens) if dens else 1
    rate = [[int(r * scale) for r in row] for (_, _, _, row) in jobs]
    req = [int(e * scale) for (_, e, _, _) in jobs]
    order = []
    for j0 in range(n):
        if len(jobs[j0][3]) != m:
            raise ValueError(f"job {j0 + 1}: rate row does not match m={m}")
        elig = sorted((p for p in range(m) if rate[j0][p] > 0), key=lambda p: (-rate[j0][p], p))
        if not elig:
            raise ValueError(f"job {j0 + 1} has no eligible processor")
        if req[j0] <= 0:
            raise ValueError(f"job {j0 + 1} needs a positive requirement")
        order.append(tuple(elig))
    if horizon is None:
        # every instant with work pending, the top active job progresses at
        # one of its own positive rates, so total runtime is bounded by
        # max release + sum of per-job worst-case service times
        horizon = max(r for (r, _, _, _) in jobs) + 1 + sum(
            -(-req[j0] // min(rate[j0][p] for p in order[j0])) for j0 in range(n)
        )

    done = [0] * n
    finished: dict[int, int] = {}
    started: dict[int, int] = {}
    events: list[JobEvent] = []
    assignments: list[tuple[int | None, ...]] = []
    for j0 in range(n):
        if jobs[j0][0] < 0:
            raise ValueError(f"job {j0 + 1} released before time 0")

    t = 0
    while len(finished) < n:
        if t > horizon:
            raise StepBudgetError(f"job set still running at t={t}")
        for j0 in range(n):
            if jobs[j0][0] == t:
                events.append(JobEvent(t, "arrival", j0 + 1))
        slots: list[int | None] = [None] * m
        free = [True] * m
        for j0 in range(n):
            if j0 + 1 in finished or jobs[j0][0] > t:
                continue
            for p in order[j0]:
                if free[p]:
                    free[p] = False
                    slots[p] = j0 + 1
                    started.setdefault(j0 + 1, t)
                    done[j0] += rate[j0][p]
                    break
        if record_assignments:
            assignments.append(tuple(slots))
        t += 1
        for j0 in range(n):
            if j0 + 1 not in finished and done[j0] >= req[j0]:
                finished[j0 + 1] = t
                events.append(JobEvent(t, "completion", j0 + 1))
        for j0 in range(n):
            if j0 + 1 not in finished and jobs[j0][2] == t:
                events.append(JobEvent(t, "deadline_miss", j0 + 1))
    return JobsTrace(
        m=m,
        end=t,
        assignments=assignments,
        events=events,
        started=started,
        finished=finished,
    )
