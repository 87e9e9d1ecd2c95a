"""Command-line front end.

Exit codes: 0 feasible/pass, 1 infeasible/fail, 2 inconclusive,
64 usage or input error. All configuration is flags; no environment
variables, so invocations are reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import (
    DEFAULT_EDF_BUDGET,
    UnsupportedCombinationError,
    Verdict,
    periodicity_bounds,
    select_test,
)
from .engine import run
from .fileio import (
    FileFormatError,
    dumps_job_set,
    dumps_task_system,
    load_job_set,
    load_task_system,
)
from .model import ValidationError, hyperperiod, validate_task_system
from .policy import PriorityPolicy, explicit_order
from .verify import (
    availability_subset_check,
    brute_force_feasibility,
    generate_instance,
    predictability_harness,
    run_instance_checks,
    shrink_instance,
)

EXIT_FEASIBLE = 0
EXIT_INFEASIBLE = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64

_OUTCOME_CODES = {"feasible": EXIT_FEASIBLE, "infeasible": EXIT_INFEASIBLE, "inconclusive": EXIT_INCONCLUSIVE}


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route through 64 instead
    def error(self, message):
        raise _CliError(message)


def _parse_policy_flag(text: str) -> PriorityPolicy:
    if text in ("rm", "dm", "edf"):
        return PriorityPolicy(text)
    if text.startswith("explicit:"):
        try:
            order = [int(tok) for tok in text[len("explicit:"):].split(",")]
        except ValueError:
            raise _CliError(f"bad explicit order in --policy {text!r}")
        return explicit_order(order)
    raise _CliError(f'--policy must be rm, dm, edf or "explicit:i,j,..." (got {text!r})')


def _resolve_policy(loaded, override: str | None) -> PriorityPolicy:
    if override:
        return _parse_policy_flag(override)
    if loaded.policy is None:
        raise _CliError("the input file names no scheduler; pass --policy")
    return loaded.policy


def _print_verdict(verdict: Verdict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(verdict.to_json(), indent=2))
        return
    print(f"outcome: {verdict.outcome}")
    print(f"rule: {verdict.rule}")
    if verdict.interval:
        print(f"checked window: [{verdict.interval[0]}, {verdict.interval[1]})")
    w = verdict.witness
    if w is not None:
        if w.kind == "deadline_miss":
            print(f"witness: task {w.task_index} job {w.instance} misses its deadline at t={w.time}")
        else:
            a, b = w.boundary
            print(f"witness: task {w.task_index} state differs between t={a} and t={b}")
    if verdict.bounds is not None:
        b = verdict.bounds
        print(f"P: {b.hyperperiod}")
        print(f"priority order: {', '.join(map(str, b.order))}")
        print(f"S: {list(b.settle)}  Shat: {list(b.settle_arbitrary)}  X: {list(b.check_from)}")
    elif verdict.P is not None:
        print(f"P: {verdict.P}")
    if verdict.budget:
        print(f"budget: {verdict.budget}")


def _cmd_analyze(args) -> int:
    loaded = load_task_system(args.input)
    policy = _resolve_policy(loaded, args.policy)
    verdict = select_test(
        loaded.system,
        loaded.platform,
        policy,
        use_X=args.use_x,
        per_task_windows=args.per_task_windows,
        edf_budget=args.edf_budget,
    )
    _print_verdict(verdict, args.format)
    return _OUTCOME_CODES[verdict.outcome]


def _cmd_bounds(args) -> int:
    loaded = load_task_system(args.input)
    policy = _resolve_policy(loaded, args.policy)
    if not policy.task_level:
        raise _CliError("bounds need a task-level policy; settle times are undefined under EDF")
    v = validate_task_system(loaded.system, loaded.platform)
    bounds = periodicity_bounds(v.system, policy)
    if args.format == "json":
        print(json.dumps(bounds.to_json(), indent=2))
        return EXIT_FEASIBLE
    print(f"P = {bounds.hyperperiod}")
    print("rank task    P_i      S   Shat      X")
    for r, idx in enumerate(bounds.order):
        print(
            f"{r + 1:4d} {idx:4d} {bounds.prefix_hyperperiods[r]:6d} "
            f"{bounds.settle[r]:6d} {bounds.settle_arbitrary[r]:6d} {bounds.check_from[r]:6d}"
        )
    return EXIT_FEASIBLE


def _cmd_simulate(args) -> int:
    loaded = load_task_system(args.input)
    policy = _resolve_policy(loaded, args.policy)
    if args.to <= args.start or args.start < 0:
        raise _CliError("need --to > --from >= 0")
    v = validate_task_system(loaded.system, loaded.platform)
    snapshot_times = ()
    if args.snapshots:
        P = hyperperiod(v.system)
        snapshot_times = tuple(range(0, args.to + 1, P))
    trace = run(
        v.system, v.platform, policy, args.to,
        snapshot_times=snapshot_times,
    )
    out = sys.stdout if args.output is None else open(args.output, "w", encoding="utf-8")
    try:
        if args.trace_format == "json":
            doc = trace.to_json()
            if args.start:
                doc["assignments"] = doc["assignments"][args.start:]
                doc["events"] = [e for e in doc["events"] if e["time"] >= args.start]
                doc["start"] = args.start
            json.dump(doc, out, indent=2)
            out.write("\n")
        else:
            text = trace.to_text()
            for line in text.splitlines():
                if line.startswith("#"):
                    out.write(line + "\n")
                    continue
                t = int(line.split(" |", 1)[0])
                if t >= args.start:
                    out.write(line + "\n")
            for t in sorted(trace.snapshots):
                out.write(f"# state@{t}: {trace.snapshots[t].to_json()}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_FEASIBLE


def _cmd_oracle(args) -> int:
    loaded = load_task_system(args.input)
    policy = _resolve_policy(loaded, args.policy)
    verdict = brute_force_feasibility(
        loaded.system, loaded.platform, policy, max_windows=args.max_windows
    )
    _print_verdict(verdict, args.format)
    return _OUTCOME_CODES[verdict.outcome]


def _cmd_predictability(args) -> int:
    spec = load_job_set(args.input)
    report = predictability_harness(spec, args.samples, seed=args.seed)
    subset = availability_subset_check(spec, samples=args.samples, seed=args.seed)
    if args.format == "json":
        doc = report.to_json()
        doc["availability_subset"] = {
            "passed": subset.passed,
            "first_violation": list(subset.first_violation) if subset.first_violation else None,
        }
        print(json.dumps(doc, indent=2))
    else:
        for row in report.rows:
            if not row.plus_feasible:
                print(f"prefix {row.length}: skipped (maximal realization misses a deadline)")
                continue
            print(
                f"prefix {row.length}: start {row.start_lo} <= {row.start_samples} <= {row.start_hi}, "
                f"finish {row.finish_lo} <= {row.finish_samples} <= {row.finish_hi} "
                f"-> {'ok' if row.ok else 'VIOLATION'}"
            )
        print(f"availability subset: {'ok' if subset.passed else f'VIOLATION at {subset.first_violation}'}")
        print(f"result: {'pass' if report.passed and subset.passed else 'fail'}")
    if report.checked_prefixes == 0:
        return EXIT_INCONCLUSIVE
    return EXIT_FEASIBLE if report.passed and subset.passed else EXIT_INFEASIBLE


def _cmd_campaign(args) -> int:
    records = []
    failures = []
    artifacts = Path(args.artifacts) if args.artifacts else None
    report_fh = open(args.report, "w", encoding="utf-8") if args.report else None
    try:
        for i in range(args.count):
            seed = args.seed * 1_000_003 + i
            instance = generate_instance(seed)
            for rec in run_instance_checks(instance, max_windows=args.max_windows):
                records.append(rec)
                if report_fh:
                    doc = rec.to_json()
                    doc["instance"] = instance.to_json()
                    report_fh.write(json.dumps(doc) + "\n")
                if rec.outcome == "fail":
                    failures.append(rec)
                    if artifacts is not None:
                        artifacts.mkdir(parents=True, exist_ok=True)
                        shrunk = _shrink_for_record(instance, rec, args.max_windows)
                        path = artifacts / f"counterexample-{seed}-{rec.check}.json"
                        path.write_text(
                            dumps_task_system(shrunk.system, shrunk.platform, shrunk.policy),
                            encoding="utf-8",
                        )
                        print(f"counterexample saved: {path}", file=sys.stderr)
    finally:
        if report_fh:
            report_fh.close()
    counts: dict[str, dict[str, int]] = {}
    for rec in records:
        counts.setdefault(rec.check, {"pass": 0, "fail": 0, "skip": 0})[rec.outcome] += 1
    summary = {"instances": args.count, "checks": counts, "failures": len(failures)}
    print(json.dumps(summary, indent=2))
    return EXIT_FEASIBLE if not failures else EXIT_INFEASIBLE


def _shrink_for_record(instance, record, max_windows):
    check = record.check

    def still_fails(candidate) -> bool:
        try:
            recs = run_instance_checks(candidate, max_windows=max_windows)
        except Exception:
            return False
        return any(r.check == check and r.outcome == "fail" for r in recs)

    return shrink_instance(instance, still_fails)


def build_parser() -> _Parser:
    parser = _Parser(prog="persched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_policy=True):
        p.add_argument("input", help="task-system JSON file")
        if with_policy:
            p.add_argument("--policy", help='override the file scheduler: rm, dm, edf or "explicit:3,1,2"')
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("analyze", help="run the strongest applicable exact feasibility test")
    add_common(p)
    p.add_argument("--use-x", action="store_true", help="start deadline checks at the tightened lower edge")
    p.add_argument("--per-task-windows", action="store_true", help="check each task only inside its settled window")
    p.add_argument("--edf-budget", type=int, default=DEFAULT_EDF_BUDGET,
                   help="max hyperperiods the EDF test may simulate (default %(default)s)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("bounds", help="print hyperperiods and settle/check-start times")
    add_common(p)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("simulate", help="emit the deterministic schedule trace")
    add_common(p)
    p.add_argument("--from", dest="start", type=int, default=0)
    p.add_argument("--to", type=int, required=True)
    p.add_argument("--trace-format", choices=("text", "json"), default="text")
    p.add_argument("--snapshots", action="store_true", help="capture states at hyperperiod multiples")
    p.add_argument("--output", help="write the trace here instead of stdout")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("oracle", help="brute-force state-recurrence feasibility oracle")
    add_common(p)
    p.add_argument("--max-windows", type=int, default=64,
                   help="hyperperiod windows before giving up (default %(default)s)")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("predictability", help="start/finish monotonicity harness for a job-set file")
    p.add_argument("input", help="job-set JSON file")
    p.add_argument("--samples", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=_cmd_predictability)

    p = sub.add_parser("campaign", help="randomized differential campaign against the oracle")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-windows", type=int, default=64)
    p.add_argument("--report", help="write one JSON record per check to this file")
    p.add_argument("--artifacts", help="directory for shrunk counterexample files")
    p.set_defaults(func=_cmd_campaign)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileFormatError, ValidationError, UnsupportedCombinationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
