"""JSON task-system and job-set files.

Rationals are JSON integers or strings "p/q" in lowest terms; parsing then
serializing then parsing is the identity, bit for bit. Serialization uses a
fixed key order and indentation so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .model import Platform, Task, TaskSystem
from .policy import PriorityPolicy, explicit_order
from .verify import JobSetSpec, JobSpec

_FRACTION_RE = re.compile(r"^(-?\d+)/([1-9]\d*)$")


class FileFormatError(ValueError):
    """Malformed input file; message carries location context."""


def parse_rational(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise FileFormatError(f"{where}: expected a rational, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        m = _FRACTION_RE.match(value)
        if m:
            return Fraction(int(m.group(1)), int(m.group(2)))
        raise FileFormatError(f'{where}: expected an integer or "p/q", got {value!r}')
    raise FileFormatError(f"{where}: expected an integer or \"p/q\" string, got {type(value).__name__}")


def rational_to_json(value: Fraction) -> int | str:
    if value.denominator == 1:
        return int(value)
    return f"{value.numerator}/{value.denominator}"


def _expect_int(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FileFormatError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise FileFormatError(f"{where}: must be >= {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class LoadedSystem:
    system: TaskSystem
    platform: Platform
    policy: PriorityPolicy | None


def _parse_policy(obj, where: str) -> PriorityPolicy:
    if not isinstance(obj, dict):
        raise FileFormatError(f"{where}: expected an object")
    kind = obj.get("policy")
    if kind not in ("rm", "dm", "edf", "explicit"):
        raise FileFormatError(f'{where}.policy: expected "rm", "dm", "edf" or "explicit", got {kind!r}')
    if kind == "explicit":
        order = obj.get("order")
        if not isinstance(order, list) or not order:
            raise FileFormatError(f"{where}.order: explicit policy needs a non-empty order array")
        return explicit_order(_expect_int(v, f"{where}.order[{i}]") for i, v in enumerate(order))
    if "order" in obj:
        raise FileFormatError(f'{where}: "order" is only valid with the explicit policy')
    return PriorityPolicy(kind)


def loads_task_system(text: str, source: str = "<string>") -> LoadedSystem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{source}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise FileFormatError(f"{source}: top level must be an object")
    tasks_doc = doc.get("tasks")
    if not isinstance(tasks_doc, list) or not tasks_doc:
        raise FileFormatError(f"{source}: \"tasks\" must be a non-empty array")
    tasks = []
    for i, entry in enumerate(tasks_doc, start=1):
        if not isinstance(entry, dict):
            raise FileFormatError(f"{source}: tasks[{i - 1}] must be an object")
        tasks.append(
            Task(
                index=i,
                offset=_expect_int(entry.get("O"), f"tasks[{i - 1}].O", 0),
                period=_expect_int(entry.get("T"), f"tasks[{i - 1}].T", 1),
                deadline=_expect_int(entry.get("D"), f"tasks[{i - 1}].D", 1),
                wcet=_expect_int(entry.get("C"), f"tasks[{i - 1}].C", 1),
            )
        )
    plat_doc = doc.get("platform")
    if not isinstance(plat_doc, dict):
        raise FileFormatError(f"{source}: \"platform\" must be an object")
    m = _expect_int(plat_doc.get("m"), "platform.m", 1)
    rates_doc = plat_doc.get("rates")
    if not isinstance(rates_doc, list):
        raise FileFormatError(f"{source}: platform.rates must be an array of rows")
    rates = []
    for i, row in enumerate(rates_doc):
        if not isinstance(row, list):
            raise FileFormatError(f"{source}: platform.rates[{i}] must be an array")
        rates.append(
            tuple(parse_rational(v, f"platform.rates[{i}][{j}]") for j, v in enumerate(row))
        )
    policy = None
    if "scheduler" in doc and doc["scheduler"] is not None:
        policy = _parse_policy(doc["scheduler"], "scheduler")
    return LoadedSystem(TaskSystem(tuple(tasks)), Platform(m, tuple(rates)), policy)


def load_task_system(path: str | Path) -> LoadedSystem:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"{p}: {e.strerror or e}") from e
    return loads_task_system(text, source=str(p))


def dump_task_system_dict(
    system: TaskSystem, platform: Platform, policy: PriorityPolicy | None
) -> dict:
    doc: dict = {
        "tasks": [
            {"O": t.offset, "T": t.period, "D": t.deadline, "C": t.wcet}
            for t in system.tasks
        ],
        "platform": {
            "m": platform.m,
            "rates": [[rational_to_json(r) for r in row] for row in platform.rates],
        },
    }
    if policy is not None:
        sched: dict = {"policy": policy.kind}
        if policy.kind == "explicit":
            sched["order"] = list(policy.order)
        doc["scheduler"] = sched
    return doc


def dumps_task_system(
    system: TaskSystem, platform: Platform, policy: PriorityPolicy | None = None
) -> str:
    return json.dumps(dump_task_system_dict(system, platform, policy), indent=2) + "\n"


def loads_job_set(text: str, source: str = "<string>") -> JobSetSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{source}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise FileFormatError(f"{source}: top level must be an object")
    plat = doc.get("platform")
    if not isinstance(plat, dict):
        raise FileFormatError(f"{source}: \"platform\" must be an object")
    m = _expect_int(plat.get("m"), "platform.m", 1)
    jobs_doc = doc.get("jobs")
    if not isinstance(jobs_doc, list) or not jobs_doc:
        raise FileFormatError(f"{source}: \"jobs\" must be a non-empty array")
    jobs = []
    for i, entry in enumerate(jobs_doc):
        where = f"jobs[{i}]"
        if not isinstance(entry, dict):
            raise FileFormatError(f"{source}: {where} must be an object")
        e_val = entry.get("e")
        if isinstance(e_val, list):
            if len(e_val) != 2:
                raise FileFormatError(f"{source}: {where}.e interval needs exactly [lo, hi]")
            e_lo = parse_rational(e_val[0], f"{where}.e[0]")
            e_hi = parse_rational(e_val[1], f"{where}.e[1]")
        else:
            e_lo = e_hi = parse_rational(e_val, f"{where}.e")
        rates_doc = entry.get("rates")
        if not isinstance(rates_doc, list) or len(rates_doc) != m:
            raise FileFormatError(f"{source}: {where}.rates must be an array of {m} rationals")
        try:
            jobs.append(
                JobSpec(
                    release=_expect_int(entry.get("r"), f"{where}.r", 0),
                    e_lo=e_lo,
                    e_hi=e_hi,
                    deadline=_expect_int(entry.get("d"), f"{where}.d", 0),
                    rates=tuple(parse_rational(v, f"{where}.rates[{j}]") for j, v in enumerate(rates_doc)),
                )
            )
        except ValueError as e:
            raise FileFormatError(f"{source}: {where}: {e}") from e
    return JobSetSpec(m, tuple(jobs))


def load_job_set(path: str | Path) -> JobSetSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"{p}: {e.strerror or e}") from e
    return loads_job_set(text, source=str(p))


def dumps_job_set(spec: JobSetSpec) -> str:
    doc = {
        "platform": {"m": spec.m},
        "jobs": [
            {
                "r": j.release,
                "e": rational_to_json(j.e_lo)
                if j.e_lo == j.e_hi
                else [rational_to_json(j.e_lo), rational_to_json(j.e_hi)],
                "d": j.deadline,
                "rates": [rational_to_json(r) for r in j.rates],
            }
            for j in spec.jobs
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
