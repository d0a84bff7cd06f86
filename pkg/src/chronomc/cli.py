"""``chronomc`` command-line frontend.

Exit codes: 0 success, 1 assertion violation / weak outcome found /
non-robust, 2 usage or parse error, 3 exploration limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence, TextIO

from .checks import selfcheck_program
from .explore import (
    ExplorationReport,
    LimitExceeded,
    Limits,
    RandomParams,
    check_robustness,
    explore,
    random_program,
)
from .lang import LitmusSyntaxError, Program, parse_program
from .semantics import (
    MemoryModel,
    ScheduleInfeasible,
    complete,
    format_schedule,
    parse_schedule,
    run,
)
from .traces import chronological_trace, shasha_snir_trace, to_dot, to_json_dict

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_LIMIT = 3


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronomc",
        description="Stateless model checker for SC, TSO and PSO litmus programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, program_required: bool = True) -> None:
        p.add_argument("--model", default="sc", choices=["sc", "tso", "pso"])
        p.add_argument("--max-steps", type=int, default=10_000, metavar="N")
        p.add_argument("--max-nodes", type=int, default=None, metavar="N")
        p.add_argument("--json", metavar="PATH")
        if program_required:
            p.add_argument("program")
        else:
            p.add_argument("program", nargs="?")

    p = sub.add_parser("explore", help="explore all trace classes and check assertions")
    common(p)
    p.add_argument("--dpor", default="race", choices=["race", "none"])
    p.add_argument("--dot", metavar="DIR")

    p = sub.add_parser("enumerate", help="list every distinct chronological trace (brute force)")
    common(p)
    p.add_argument("--dot", metavar="DIR")

    p = sub.add_parser("robustness", help="compare trace classes with SC")
    common(p)
    p.add_argument("--dpor", default="race", choices=["race", "none"])

    p = sub.add_parser("replay", help="run one schedule and print the final state")
    common(p)
    p.add_argument("--schedule", required=True)
    p.add_argument("--dot", metavar="DIR")

    p = sub.add_parser("dot", help="print the trace graph of one schedule in DOT")
    common(p)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trace", default="chronological", choices=["chronological", "shasha-snir"])

    p = sub.add_parser("selfcheck", help="run the trace-equivalence and clock oracles")
    common(p, program_required=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=50)
    return parser


def _load(path: str) -> Program:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return parse_program(text)
    except LitmusSyntaxError as exc:
        raise UsageError(f"{path}:{exc}") from exc


def _limits(args: argparse.Namespace) -> Limits:
    if args.max_steps < 1 or (args.max_nodes is not None and args.max_nodes < 1):
        raise UsageError("limits must be positive")
    return Limits(args.max_steps, args.max_nodes)


def _write_json(path: str | None, data: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_dots(directory: str | None, traces: list) -> None:
    if not directory:
        return
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, trace in enumerate(traces, start=1):
        (out / f"trace_{i:04d}.dot").write_text(to_dot(trace, f"trace_{i:04d}"))


def _format_state(state: tuple) -> str:
    regs, mem = state
    parts = [f"{t}:${r}={v}" for t, rs in regs for r, v in rs]
    cells = " ".join(f"{x}={v}" for x, v in mem)
    return f"{' '.join(parts) or '(all registers 0)'} | {cells}"


def _print_report(report: ExplorationReport, out: TextIO) -> None:
    print(f"model: {report.model}  engine: {report.engine}", file=out)
    print(f"executions explored: {report.executions_explored}", file=out)
    print(f"blocked executions: {report.blocked}", file=out)
    print(f"bound exceeded: {report.bound_exceeded}", file=out)
    print(f"chronological traces: {report.distinct_chronological_traces}", file=out)
    print(f"shasha-snir traces: {report.distinct_shasha_snir_traces}", file=out)
    print(f"final states: {len(report.final_states)}", file=out)
    for state in sorted(report.final_states):
        print(f"  {_format_state(state)}", file=out)
    if report.final is not None:
        if report.final.quantifier == "exists":
            verdict = "satisfied" if report.exists_satisfied else "not satisfied"
            print(f"{report.final}: {verdict}", file=out)
            if report.exists_witness is not None:
                print(f"witness: {format_schedule(report.exists_witness)}", file=out)
        else:
            held = not any(v.kind == "forall" for v in report.violations)
            print(f"{report.final}: {'holds' if held else 'violated'}", file=out)
    print(f"violations: {len(report.violations)}", file=out)
    for v in report.violations:
        print(f"  {v.kind} {v.description}", file=out)
        print(f"    witness: {format_schedule(v.schedule)}", file=out)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_explore(args: argparse.Namespace, out: TextIO) -> int:
    program = _load(args.program)
    report = explore(program, MemoryModel.parse(args.model), _limits(args), args.dpor)
    _print_report(report, out)
    _write_json(args.json, report.to_dict())
    _write_dots(args.dot, report.chronological_traces)
    return EXIT_FAIL if report.failed else EXIT_OK


def _cmd_enumerate(args: argparse.Namespace, out: TextIO) -> int:
    program = _load(args.program)
    report = explore(program, MemoryModel.parse(args.model), _limits(args), "none")
    for i, x in enumerate(report.representatives, start=1):
        print(f"trace {i}: {format_schedule(x.schedule())}", file=out)
    _print_report(report, out)
    _write_json(args.json, report.to_dict())
    _write_dots(args.dot, report.chronological_traces)
    return EXIT_FAIL if report.failed else EXIT_OK


def _cmd_robustness(args: argparse.Namespace, out: TextIO) -> int:
    program = _load(args.program)
    model = MemoryModel.parse(args.model)
    against = (MemoryModel.TSO, MemoryModel.PSO) if model is MemoryModel.SC else (model,)
    result = check_robustness(program, against, _limits(args), args.dpor)
    for m, count in result.counts.items():
        print(f"{m}: {count} trace classes", file=out)
    for m, ok in result.robust.items():
        print(f"{m}: {'robust' if ok else 'not robust'}", file=out)
        witness = result.witnesses.get(m)
        if witness is not None:
            print(f"  witness: {format_schedule(witness[0])}", file=out)
    _write_json(args.json, result.to_dict())
    return EXIT_OK if result.verdict else EXIT_FAIL


def _replay(args: argparse.Namespace):
    program = _load(args.program)
    model = MemoryModel.parse(args.model)
    try:
        schedule = parse_schedule(args.schedule)
    except ValueError as exc:
        raise UsageError(f"bad schedule: {exc}") from exc
    try:
        execution, config = run(program, schedule, model)
    except ScheduleInfeasible as exc:
        raise UsageError(str(exc)) from exc
    return model, execution, config


def _cmd_replay(args: argparse.Namespace, out: TextIO) -> int:
    model, execution, config = _replay(args)
    for e in execution:
        print(e, file=out)
    for name in sorted(config.registers):
        regs = config.registers[name]
        line = " ".join(f"${r}={v}" for r, v in sorted(regs.items())) or "(none)"
        print(f"{name}: {line}  [{config.status[name]}]", file=out)
    print("memory: " + " ".join(f"{x}={v}" for x, v in sorted(config.memory.items())), file=out)
    pending = [f"{t}:{list(b)}" for t, b in sorted(config.buffers.items()) if b]
    if pending:
        print("pending: " + " ".join(pending), file=out)
    completed = complete(execution, config, model)
    trace = chronological_trace(completed, model)
    _write_json(args.json, {
        "schedule": format_schedule(execution.schedule()),
        "registers": config.registers,
        "memory": config.memory,
        "status": config.status,
        "trace": to_json_dict(trace),
    })
    _write_dots(args.dot, [trace])
    return EXIT_OK


def _cmd_dot(args: argparse.Namespace, out: TextIO) -> int:
    model, execution, config = _replay(args)
    completed = complete(execution, config, model)
    if args.trace == "chronological":
        trace = chronological_trace(completed, model)
    else:
        trace = shasha_snir_trace(completed, model)
    out.write(to_dot(trace))
    _write_json(args.json, to_json_dict(trace))
    return EXIT_OK


def _cmd_selfcheck(args: argparse.Namespace, out: TextIO) -> int:
    limits = _limits(args)
    models = (MemoryModel.parse(args.model),) if args.model != "sc" else (
        MemoryModel.SC, MemoryModel.TSO, MemoryModel.PSO)
    if args.program:
        programs = [(args.program, _load(args.program))]
    else:
        programs = [(f"seed {args.seed + i}", random_program(args.seed + i, RandomParams()))
                    for i in range(args.count)]
    tally = {"correspondence": [0, 0], "clocks": [0, 0]}
    for label, program in programs:
        for name, problems in selfcheck_program(program, models, limits).items():
            tally[name][0 if not problems else 1] += 1
            for p in problems[:3]:
                print(f"FAIL {name} {label}: {p}", file=out)
    for name, (passed, failed) in tally.items():
        print(f"{name}: {passed} passed, {failed} failed", file=out)
    _write_json(args.json, {k: {"passed": p, "failed": f} for k, (p, f) in tally.items()})
    return EXIT_OK if all(f == 0 for _, f in tally.values()) else EXIT_FAIL


_COMMANDS = {
    "explore": _cmd_explore,
    "enumerate": _cmd_enumerate,
    "robustness": _cmd_robustness,
    "replay": _cmd_replay,
    "dot": _cmd_dot,
    "selfcheck": _cmd_selfcheck,
}


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LimitExceeded as exc:
        print(f"limit exceeded: {exc}", file=sys.stderr)
        return EXIT_LIMIT


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
