"""Core value types: periodic tasks, jobs, platforms, and system states.

Time is discrete: offsets, periods, deadlines and instants are integers.
Work is exact: execution rates and executed amounts are `fractions.Fraction`
values, never floats, so state equality is decidable and sound.

Conventions used across the package:
  * task indices and processor indices are 1-based in every public surface
    (states, traces, verdicts, file formats);
  * a platform's rate matrix has one row per task and one column per
    processor (``rates[i-1][j-1]`` is the rate of task i on processor j);
  * rate 0 means the processor cannot serve the task at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

#: State tag for a task whose first job has not been released yet.
PENDING = -1


class ValidationError(ValueError):
    """Raised when a task system / platform pair is malformed.

    Carries the full list of problems, not just the first one found.
    """

    def __init__(self, errors: Sequence[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class Task:
    """One periodic task: first release at `offset`, then every `period`.

    The k-th job (k >= 1) is released at offset + (k-1)*period, needs `wcet`
    units of work and must finish by its release + `deadline`.
    """

    index: int
    offset: int
    period: int
    deadline: int
    wcet: int

    @property
    def deadline_class(self) -> str:
        if self.deadline == self.period:
            return "implicit"
        if self.deadline < self.period:
            return "constrained"
        return "arbitrary"

    @property
    def max_active_jobs(self) -> int:
        """Most jobs of this task that can be simultaneously active in a
        deadline-meeting schedule: ceil(deadline / period)."""
        return -(-self.deadline // self.period)


@dataclass(frozen=True)
class Job:
    """A concrete job of a periodic task."""

    task_index: int
    instance: int
    arrival: int
    absolute_deadline: int
    requirement: Fraction

    @property
    def identity(self) -> tuple[int, int]:
        return (self.task_index, self.instance)


def job_arrival(task: Task, k: int) -> int:
    """Release instant of the k-th job: offset + (k-1)*period."""
    if k < 1:
        raise ValueError(f"job instance index must be >= 1, got {k}")
    return task.offset + (k - 1) * task.period


def job_of(task: Task, k: int) -> Job:
    """Build the k-th job of `task` with its exact release and deadline."""
    r = job_arrival(task, k)
    return Job(
        task_index=task.index,
        instance=k,
        arrival=r,
        absolute_deadline=r + task.deadline,
        requirement=Fraction(task.wcet),
    )


@dataclass(frozen=True)
class TaskSystem:
    """An ordered collection of periodic tasks.

    The order is significant: analysis routines that assume a priority
    order renumber tasks so position 0 is the highest priority.
    """

    tasks: tuple[Task, ...]

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def max_offset(self) -> int:
        return max(t.offset for t in self.tasks)

    @property
    def max_deadline(self) -> int:
        return max(t.deadline for t in self.tasks)

    def task(self, index: int) -> Task:
        return self.tasks[index - 1]

    def reordered(self, order: Sequence[int]) -> "TaskSystem":
        """System with tasks permuted by `order` (original 1-based indices).

        Task objects keep their original `index` field so results can be
        mapped back; only the positional order changes.
        """
        return TaskSystem(tuple(self.tasks[i - 1] for i in order))


def make_system(specs: Iterable[tuple[int, int, int, int]]) -> TaskSystem:
    """Convenience constructor from (offset, period, deadline, wcet) tuples."""
    return TaskSystem(
        tuple(Task(i + 1, o, t, d, c) for i, (o, t, d, c) in enumerate(specs))
    )


def hyperperiod(system: TaskSystem, upto: int | None = None) -> int:
    """lcm of the first `upto` task periods (all of them by default)."""
    n = system.n if upto is None else upto
    if not 1 <= n <= system.n:
        raise ValueError(f"prefix length must be in 1..{system.n}, got {upto}")
    return math.lcm(*(t.period for t in system.tasks[:n]))


@dataclass(frozen=True)
class Platform:
    """m processors with per-task execution rates.

    ``rates[i-1][j-1]`` is how much work task i completes per time unit on
    processor j. Zero marks an ineligible processor.
    """

    m: int
    rates: tuple[tuple[Fraction, ...], ...]

    @property
    def kind(self) -> str:
        """Informational tag: identical / uniform / unrelated.

        Identical: every rate is 1. Uniform: all rows equal (a per-processor
        speed vector). Anything else is unrelated. The scheduler always runs
        the unrelated-machine logic regardless of this tag.
        """
        if all(r == 1 for row in self.rates for r in row):
            return "identical"
        if len(set(self.rates)) <= 1:
            return "uniform"
        return "unrelated"

    def rate(self, task_index: int, proc_index: int) -> Fraction:
        return self.rates[task_index - 1][proc_index - 1]


def identical_platform(m: int, n: int) -> Platform:
    """All-rates-1 platform for n tasks on m unit processors."""
    one = Fraction(1)
    return Platform(m, tuple(tuple(one for _ in range(m)) for _ in range(n)))


def processor_order_for_task(platform: Platform, task_index: int) -> tuple[int, ...]:
    """Eligible processors for a task, fastest first.

    Ties go to the lower processor index so the order is total and stable;
    zero-rate processors are excluded.
    """
    row = platform.rates[task_index - 1]
    eligible = [j + 1 for j in range(platform.m) if row[j] > 0]
    eligible.sort(key=lambda j: (-row[j - 1], j))
    return tuple(eligible)


@dataclass(frozen=True)
class SystemState:
    """Snapshot of the whole system at one instant: one triple per task.

    Per task the triple is either
      (-1, t1, 0)      - first release still t1 time units away, or
      (n1, t2, t3)     - n1 currently active jobs; t2 = time since the
                         oldest active job's release (or, when n1 = 0,
                         since the task's most recent release); t3 = exact
                         amount executed of the oldest active job, 0 when
                         there is none.

    Equality is plain tuple equality, exact by construction.
    """

    triples: tuple[tuple[int, int, Fraction], ...]

    def __iter__(self):
        return iter(self.triples)

    def task_triple(self, index: int) -> tuple[int, int, Fraction]:
        return self.triples[index - 1]

    def active_counts(self) -> tuple[int, ...]:
        return tuple(max(tr[0], 0) for tr in self.triples)

    def to_json(self) -> list:
        return [
            [a, b, c.numerator if c.denominator == 1 else f"{c.numerator}/{c.denominator}"]
            for (a, b, c) in self.triples
        ]


def state_bound_violations(state: SystemState, system: TaskSystem) -> list[str]:
    """Check a captured state against the per-task component bounds.

    The bounds are guaranteed only on miss-free prefixes of a schedule; a
    tardy backlog may legitimately exceed them, so this is a checker used by
    tests, not a constructor-time invariant.
    """
    problems = []
    for task, (a, b, c) in zip(system.tasks, state.triples):
        cap = task.max_active_jobs
        if a == PENDING:
            if not 0 < b <= task.offset:
                problems.append(f"task {task.index}: pending t1={b} outside (0, {task.offset}]")
            if c != 0:
                problems.append(f"task {task.index}: pending state carries executed={c}")
        else:
            if not 0 <= a <= cap:
                problems.append(f"task {task.index}: n1={a} outside [0, {cap}]")
            if not 0 <= b < task.period * cap:
                problems.append(f"task {task.index}: t2={b} outside [0, {task.period * cap})")
            if not 0 <= c < task.wcet:
                problems.append(f"task {task.index}: t3={c} outside [0, {task.wcet})")
            if a == 0 and c != 0:
                problems.append(f"task {task.index}: idle state carries executed={c}")
    return problems


@dataclass(frozen=True)
class ValidatedSystem:
    """A task system + platform that passed validation.

    Offsets are normalized (all-equal offsets shifted to zero) and the
    deadline/synchrony classification is attached.
    """

    system: TaskSystem
    platform: Platform
    deadline_class: str
    synchronous: bool
    platform_kind: str


def validate_task_system(system: TaskSystem, platform: Platform) -> ValidatedSystem:
    """Check structural invariants and classify the system.

    Collects every violation before raising. A synchronous system (all
    offsets equal) is returned with offsets normalized to zero: shifting all
    offsets by a constant shifts the schedule rigidly.
    """
    errors = []
    if system.n == 0:
        raise ValidationError(["task system is empty"])
    if platform.m < 1:
        errors.append(f"platform needs at least one processor, got m={platform.m}")
    if len(platform.rates) != system.n:
        errors.append(
            f"rate matrix has {len(platform.rates)} rows for {system.n} tasks"
        )
    for i, task in enumerate(system.tasks, start=1):
        if task.index != i:
            errors.append(f"task at position {i} carries index {task.index}")
        if task.period < 1:
            errors.append(f"task {i}: period must be >= 1, got {task.period}")
        if task.wcet < 1:
            errors.append(f"task {i}: wcet must be >= 1, got {task.wcet}")
        if task.offset < 0:
            errors.append(f"task {i}: offset must be >= 0, got {task.offset}")
        if task.deadline < 1:
            errors.append(f"task {i}: deadline must be >= 1, got {task.deadline}")
    for i, row in enumerate(platform.rates, start=1):
        if len(row) != platform.m:
            errors.append(f"rate row {i} has {len(row)} entries for m={platform.m}")
            continue
        if any(r < 0 for r in row):
            errors.append(f"rate row {i} contains a negative rate")
        elif i <= system.n and all(r == 0 for r in row):
            errors.append(f"task {i}: no eligible processor (rate row all zeros)")
    if errors:
        raise ValidationError(errors)

    offsets = {t.offset for t in system.tasks}
    synchronous = len(offsets) == 1
    if synchronous and offsets != {0}:
        system = TaskSystem(
            tuple(
                Task(t.index, 0, t.period, t.deadline, t.wcet)
                for t in system.tasks
            )
        )

    classes = {t.deadline_class for t in system.tasks}
    if classes == {"implicit"}:
        deadline_class = "implicit"
    elif "arbitrary" in classes:
        deadline_class = "arbitrary"
    else:
        deadline_class = "constrained"

    return ValidatedSystem(
        system=system,
        platform=platform,
        deadline_class=deadline_class,
        synchronous=synchronous,
        platform_kind=platform.kind,
    )
