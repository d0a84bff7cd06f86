"""Cross-checks between the trace, clock and exploration layers.

These back the ``selfcheck`` command. Each returns a list of human-readable
discrepancies; an empty list means the check passed.
"""

from __future__ import annotations

from .clocks import races_of
from .explore import Limits, brute_force
from .lang import Program
from .semantics import Event, Execution, MemoryModel
from .traces import HappensBefore, chronological_trace, happens_before

RACE_RELATIONS = ("uu", "src_ct", "cf_ct")


def immediate_races(execution: Execution, model: MemoryModel) -> set[tuple[Event, Event]]:
    """Cross-owner uu/src/cf edges that no longer path explains."""
    trace = chronological_trace(execution, model)
    hb = happens_before(trace)
    preds: dict[Event, list[Event]] = {}
    for a, b in trace.all_edges():
        preds.setdefault(b, []).append(a)
    out = set()
    for rel in RACE_RELATIONS:
        for a, b in trace.edges[rel]:
            if a.thread.owner == b.thread.owner:
                continue
            if not any(c != a and hb(a, c) for c in preds[b]):
                out.add((a, b))
    return out


def clock_discrepancies(execution: Execution, model: MemoryModel) -> list[str]:
    """Compare clock order and races against the trace's closure."""
    hb: HappensBefore = happens_before(chronological_trace(execution, model))
    per_event, clocks = races_of(execution, model)
    problems = []
    for a in execution:
        for b in execution:
            if a == b:
                continue
            if (clocks[a] <= clocks[b]) != hb.strictly(a, b):
                problems.append(f"clock order disagrees on {a} -> {b}")
    got = {(r.earlier, r.later) for _, rs in per_event for r in rs}
    want = immediate_races(execution, model)
    if got != want:
        problems.append(f"race sets differ: extra {len(got - want)}, missing {len(want - got)}")
    return problems


def correspondence_discrepancies(executions: list[Execution], model: MemoryModel) -> list[str]:
    """Partition by Shasha-Snir trace must equal partition by chronological trace."""
    from .traces import shasha_snir_trace

    by_ct: dict = {}
    by_ss: dict = {}
    for i, x in enumerate(executions):
        by_ct.setdefault(chronological_trace(x, model), set()).add(i)
        by_ss.setdefault(shasha_snir_trace(x, model), set()).add(i)
    left = sorted(map(sorted, by_ct.values()))
    right = sorted(map(sorted, by_ss.values()))
    return [] if left == right else ["trace partitions differ"]


def selfcheck_program(
    program: Program, models: tuple[MemoryModel, ...], limits: Limits | None = None
) -> dict[str, list[str]]:
    """Run the trace-correspondence and clock-oracle checks on every execution."""
    results: dict[str, list[str]] = {"correspondence": [], "clocks": []}
    for model in models:
        # brute_force itself raises if the partitions ever diverge
        _, executions = brute_force(program, model, limits)
        results["correspondence"] += correspondence_discrepancies(executions, model)
        for x in executions:
            results["clocks"] += clock_discrepancies(x, model)
    return results
