"""Priority policies: who beats whom.

All shipped policies are deterministic, memoryless, job-level fixed-priority
and request-dependent: once two jobs are ordered, they stay ordered, and
shifting both jobs one hyperperiod forward preserves the comparison. The
task-level policies (rate-monotonic, deadline-monotonic, explicit order)
additionally fix priorities per task.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Job, TaskSystem


@dataclass(frozen=True)
class PriorityPolicy:
    """A priority rule. kind is one of "rm", "dm", "edf", "explicit".

    "explicit" carries a permutation of 1..n, highest priority first.
    """

    kind: str
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("rm", "dm", "edf", "explicit"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.order:
                raise ValueError("explicit policy needs a priority order")
        elif self.order is not None:
            raise ValueError(f"{self.kind} takes no explicit order")

    @property
    def task_level(self) -> bool:
        return self.kind != "edf"

    # All shipped policies share these classification flags.
    job_level_fixed = True
    request_dependent = True
    memoryless = True
    deterministic = True

    def describe(self) -> str:
        if self.kind == "explicit":
            return "explicit:" + ",".join(map(str, self.order))
        return self.kind


RM = PriorityPolicy("rm")
DM = PriorityPolicy("dm")
EDF = PriorityPolicy("edf")


def explicit_order(order) -> PriorityPolicy:
    return PriorityPolicy("explicit", tuple(order))


def task_priority_order(policy: PriorityPolicy, system: TaskSystem) -> tuple[int, ...]:
    """Priority permutation (original task indices, highest first).

    RM sorts by ascending period, DM by ascending deadline, both breaking
    ties toward the lower task index. Only meaningful for task-level
    policies; EDF orders jobs, not tasks.
    """
    if not policy.task_level:
        raise ValueError("EDF does not define a task-level priority order")
    indices = [t.index for t in system.tasks]
    if policy.kind == "rm":
        return tuple(sorted(indices, key=lambda i: (system.task(i).period, i)))
    if policy.kind == "dm":
        return tuple(sorted(indices, key=lambda i: (system.task(i).deadline, i)))
    order = policy.order
    if sorted(order) != list(range(1, system.n + 1)):
        raise ValueError(f"explicit order {order} is not a permutation of 1..{system.n}")
    return order


def task_ranks(policy: PriorityPolicy, system: TaskSystem) -> dict[int, int]:
    """Map original task index -> rank (1 = highest priority)."""
    order = task_priority_order(policy, system)
    return {idx: rank for rank, idx in enumerate(order, start=1)}


def job_key_fn(policy: PriorityPolicy, system: TaskSystem):
    """Sort key for jobs: lower key = higher priority; total over distinct jobs.

    Task-level policies compare by task rank, then FIFO within the task.
    EDF compares by absolute deadline, then task index, then arrival. Both
    keys shift consistently when a job is replaced by its counterpart one
    hyperperiod later (deadline and arrival grow by exactly P), which is
    what makes the schedulers request-dependent.
    """
    if policy.kind == "edf":
        return lambda job: (job.absolute_deadline, job.task_index, job.arrival)
    ranks = task_ranks(policy, system)
    return lambda job: (ranks[job.task_index], job.instance)


def compare_jobs(policy: PriorityPolicy, system: TaskSystem, a: Job, b: Job) -> int:
    """-1 if a has higher priority than b, +1 otherwise.

    The order is strict and time-invariant; equal keys would mean the same
    job was passed twice.
    """
    key = job_key_fn(policy, system)
    ka, kb = key(a), key(b)
    if ka == kb:
        raise ValueError("compare_jobs needs two distinct jobs")
    return -1 if ka < kb else 1
