"""Exploration engines: exhaustive enumeration and DPOR.

``brute_force`` enumerates every maximal schedule and is the reference
oracle. ``dpor_explore`` is a source-set DPOR with sleep sets whose
happens-before and races come from the vector clocks in :mod:`clocks`.
Under SC a store and its (forced) update form a single exploration step.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .clocks import AuxConfig, Race, aux_step, initial_aux
from .lang import Fence, FinalCondition, Load, Program, Store, ThreadId, Update, evaluate
from .semantics import (
    BLOCKED,
    FINISHED,
    RUNNING,
    VIOLATED,
    Configuration,
    Event,
    Execution,
    MemoryModel,
    apply_step,
    enabled,
    format_schedule,
    initial_config,
)
from .traces import (
    ChronologicalTrace,
    ShashaSnirTrace,
    both_traces,
    to_json_dict,
)


class LimitExceeded(RuntimeError):
    """The exploration budget (node cap) was exhausted."""


class TraceCorrespondenceError(AssertionError):
    """Chronological and Shasha-Snir trace partitions disagree."""


@dataclass(frozen=True)
class Limits:
    max_steps: int = 10_000  # per real thread
    max_nodes: int | None = None  # exploration steps in total


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Violation:
    kind: str  # "assert" | "forall"
    description: str
    schedule: list[ThreadId]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "description": self.description,
                "schedule": format_schedule(self.schedule)}


def _state_dict(state: tuple) -> dict:
    regs, mem = state
    return {
        "registers": {t: dict(rs) for t, rs in regs},
        "memory": dict(mem),
    }


@dataclass
class ExplorationReport:
    model: MemoryModel
    engine: str
    executions_explored: int = 0
    blocked: int = 0
    bound_exceeded: int = 0
    sleep_blocked: int = 0
    nodes: int = 0
    chronological_traces: list[ChronologicalTrace] = field(default_factory=list)
    shasha_snir_traces: list[ShashaSnirTrace] = field(default_factory=list)
    representatives: list[Execution] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    final_states: set[tuple] = field(default_factory=set)
    final: FinalCondition | None = None
    exists_witness: list[ThreadId] | None = None
    wall_time: float = 0.0
    _ct_to_ss: dict = field(default_factory=dict, repr=False)
    _ss_to_ct: dict = field(default_factory=dict, repr=False)

    @property
    def distinct_chronological_traces(self) -> int:
        return len(self.chronological_traces)

    @property
    def distinct_shasha_snir_traces(self) -> int:
        return len(self.shasha_snir_traces)

    @property
    def redundancy(self) -> float:
        if not self.chronological_traces:
            return 0.0
        return self.executions_explored / len(self.chronological_traces)

    @property
    def exists_satisfied(self) -> bool | None:
        if self.final is None or self.final.quantifier != "exists":
            return None
        return self.exists_witness is not None

    @property
    def failed(self) -> bool:
        """True when the run should be reported as a failure (exit 1)."""
        return bool(self.violations) or bool(self.exists_satisfied)

    def chronological_set(self) -> frozenset[ChronologicalTrace]:
        return frozenset(self.chronological_traces)

    def shasha_snir_set(self) -> frozenset[ShashaSnirTrace]:
        return frozenset(self.shasha_snir_traces)

    # -- recording ---------------------------------------------------------

    def record(
        self,
        execution: Execution,
        config: Configuration,
        traces: tuple[ChronologicalTrace, ShashaSnirTrace] | None = None,
    ) -> tuple[ChronologicalTrace, ShashaSnirTrace]:
        """Account for one maximal execution; returns its two traces."""
        self.executions_explored += 1
        ct, ss = traces or both_traces(execution, self.model)
        known_ss = self._ct_to_ss.get(ct)
        known_ct = self._ss_to_ct.get(ss)
        if known_ss is None and known_ct is None:
            self._ct_to_ss[ct] = ss
            self._ss_to_ct[ss] = ct
            self.chronological_traces.append(ct)
            self.shasha_snir_traces.append(ss)
            self.representatives.append(execution)
        elif known_ss != ss or known_ct != ct:
            raise TraceCorrespondenceError(
                f"trace partitions disagree at schedule {format_schedule(execution.schedule())}"
            )

        statuses = config.status.values()
        if BLOCKED in statuses:
            self.blocked += 1
        for name, status in sorted(config.status.items()):
            if status == VIOLATED:
                instr = config.program.threads[name][config.pcs[name] - 1]
                self.violations.append(
                    Violation("assert", f"{name}: {instr}", execution.schedule())
                )
        if all(s == FINISHED for s in statuses):
            state = config.final_state()
            self.final_states.add(state)
            if self.final is not None and not check_final(config, self.final):
                if self.final.quantifier == "forall":
                    self.violations.append(
                        Violation("forall", str(self.final), execution.schedule())
                    )
            elif self.final is not None and self.exists_witness is None:
                self.exists_witness = execution.schedule()
        return ct, ss

    def to_dict(self) -> dict:
        return {
            "model": str(self.model),
            "engine": self.engine,
            "executions_explored": self.executions_explored,
            "blocked": self.blocked,
            "bound_exceeded": self.bound_exceeded,
            "sleep_blocked": self.sleep_blocked,
            "distinct_chronological_traces": self.distinct_chronological_traces,
            "distinct_shasha_snir_traces": self.distinct_shasha_snir_traces,
            "chronological_traces": [
                {"schedule": format_schedule(x.schedule()), "trace": to_json_dict(t)}
                for x, t in zip(self.representatives, self.chronological_traces)
            ],
            "final": None if self.final is None else str(self.final),
            "exists_satisfied": self.exists_satisfied,
            "exists_witness": None if self.exists_witness is None
            else format_schedule(self.exists_witness),
            "violations": [v.to_dict() for v in self.violations],
            "final_states": [_state_dict(s) for s in sorted(self.final_states)],
            "wall_time": self.wall_time,
        }

    def to_json(self, include_time: bool = True) -> str:
        data = self.to_dict()
        if not include_time:
            del data["wall_time"]
        return json.dumps(data, indent=2, sort_keys=True)


def check_final(config: Configuration, condition: FinalCondition) -> bool:
    """Whether one final configuration satisfies the condition's formula."""
    return evaluate(condition.formula, config.registers)


# ---------------------------------------------------------------------------
# Shared scheduling helpers
# ---------------------------------------------------------------------------


def _schedulable(config: Configuration, model: MemoryModel, limits: Limits) -> list[ThreadId]:
    return [
        t for t in enabled(config, model)
        if t.aux or config.counts.get(t, 0) < limits.max_steps
    ]


def _bound_hit(config: Configuration) -> bool:
    return any(s == RUNNING for s in config.status.values())


class _Budget:
    def __init__(self, limits: Limits):
        self.cap = limits.max_nodes
        self.used = 0

    def spend(self) -> None:
        self.used += 1
        if self.cap is not None and self.used > self.cap:
            raise LimitExceeded(f"node limit {self.cap} exceeded")


# ---------------------------------------------------------------------------
# Brute force
# ---------------------------------------------------------------------------


def access_key(execution: Execution) -> frozenset:
    """Per-thread and per-shared-object projections of an execution.

    The shared objects are each memory cell and, per real thread, its store
    buffers taken together. Two executions with the same key differ only by
    swaps of adjacent events that share neither a thread nor an object, so
    they have the same chronological and Shasha-Snir traces. The key is
    deliberately finer than trace equivalence; it only saves recomputation.
    Real-thread instructions are the program's own objects, so their ids
    stand in for them within one exploration.
    """
    objs: dict[object, list] = {}
    for e in execution:
        thread, instr = e.thread, e.instr
        name = (thread, e.index)
        if not thread.aux:
            objs.setdefault(thread, []).append(id(instr))
        if isinstance(instr, (Store, Load, Update, Fence)):
            objs.setdefault(thread.owner, []).append(name)
            if isinstance(instr, (Load, Update)):
                objs.setdefault(("memory", instr.loc), []).append(name)
    return frozenset((k, tuple(v)) for k, v in objs.items())


def brute_force(
    program: Program, model: MemoryModel, limits: Limits | None = None
) -> tuple[ExplorationReport, list[Execution]]:
    """Enumerate every maximal schedule depth-first.

    Returns the report plus every completed execution that stayed within
    the step bound.
    """
    limits = limits or Limits()
    budget = _Budget(limits)
    report = ExplorationReport(model, "none", final=program.final)
    executions: list[Execution] = []
    known: dict[frozenset, tuple[ChronologicalTrace, ShashaSnirTrace]] = {}
    start = time.perf_counter()

    stack: list[tuple[Configuration, tuple[Event, ...]]] = [(initial_config(program, model), ())]
    while stack:
        config, events = stack.pop()
        choices = _schedulable(config, model, limits)
        if not choices:
            if _bound_hit(config):
                report.bound_exceeded += 1
                continue
            execution = Execution(events)
            executions.append(execution)
            key = access_key(execution)
            known[key] = report.record(execution, config, known.get(key))
            continue
        for tid in reversed(choices):
            budget.spend()
            child, event = apply_step(config, tid, model)
            stack.append((child, events + (event,)))

    report.nodes = budget.used
    report.wall_time = time.perf_counter() - start
    return report, executions


# ---------------------------------------------------------------------------
# DPOR
# ---------------------------------------------------------------------------


@dataclass
class ExplorationNode:
    """A point on the current DFS path: the state after ``prefix``."""

    prefix: Execution
    backtrack: set[ThreadId] = field(default_factory=set)
    done: set[ThreadId] = field(default_factory=set)
    sleep: set[ThreadId] = field(default_factory=set)
    config: Configuration | None = field(default=None, repr=False)
    aux: AuxConfig | None = field(default=None, repr=False)
    # exploration step that produced each event of the prefix
    step_of: tuple[int, ...] = field(default=(), repr=False)
    active: ThreadId | None = None


def _take(
    config: Configuration, aux: AuxConfig, tid: ThreadId, model: MemoryModel
) -> tuple[Configuration, AuxConfig, list[Event], set[Race]]:
    """One exploration step; under SC a store is fused with its update."""
    config, event = apply_step(config, tid, model)
    aux, races = aux_step(aux, event)
    events, found = [event], set(races)
    if model is MemoryModel.SC:
        for buf_tid, buf in config.buffers.items():
            if buf:
                config, upd = apply_step(config, buf_tid, model)
                aux, races = aux_step(aux, upd)
                events.append(upd)
                found |= races
    return config, aux, events, found


def _race_key(race: Race) -> tuple:
    return (race.earlier.thread, race.earlier.index, race.later.thread, race.later.index)


def _depends(aux: AuxConfig, earlier: Sequence[Event], later: Sequence[Event]) -> bool:
    clocks = aux.event_clocks
    return any(clocks[a] <= clocks[b] for a in earlier for b in later)


class _Dpor:
    def __init__(self, program: Program, model: MemoryModel, limits: Limits):
        self.program = program
        self.model = model
        self.limits = limits
        self.budget = _Budget(limits)
        self.report = ExplorationReport(model, "race", final=program.final)

    def schedulable(self, config: Configuration) -> list[ThreadId]:
        return _schedulable(config, self.model, self.limits)

    def independent(self, node: ExplorationNode, p: ThreadId, q: ThreadId) -> bool:
        config, aux, ep, _ = _take(node.config, node.aux, p, self.model)
        if q not in self.schedulable(config):
            return False
        _, aux, eq, _ = _take(config, aux, q, self.model)
        return not _depends(aux, ep, eq)

    def initials(self, node: ExplorationNode, v: list[ThreadId]) -> set[ThreadId] | None:
        """Threads whose first step in ``v`` has no predecessor within ``v``."""
        config, aux = node.config, node.aux
        steps: list[list[Event]] = []
        for tid in v:
            if tid not in enabled(config, self.model):
                return None
            config, aux, events, _ = _take(config, aux, tid, self.model)
            steps.append(events)
        seen: set[ThreadId] = set()
        result: set[ThreadId] = set()
        for j, tid in enumerate(v):
            if tid in seen:
                continue
            seen.add(tid)
            if not any(_depends(aux, steps[i], steps[j]) for i in range(j)):
                result.add(tid)
        return result

    def reverse(self, stack: list[ExplorationNode], child: ExplorationNode, race: Race) -> None:
        events = child.prefix.events
        pos = events.index(race.earlier)
        sa = child.step_of[pos]
        last = len(stack) - 1  # step index of the step just taken
        if sa == last:
            return
        by_step: dict[int, list[Event]] = {}
        for e, s in zip(events, child.step_of):
            by_step.setdefault(s, []).append(e)
        first = by_step[sa]
        v = [
            by_step[t][0].thread
            for t in range(sa + 1, last)
            if not _depends(child.aux, first, by_step[t])
        ]
        v.append(by_step[last][0].thread)
        target = stack[sa]
        found = self.initials(target, v)
        if found is None:
            found = set(self.schedulable(target.config))
        if found & target.backtrack:
            return
        awake = found - target.sleep
        target.backtrack.add(min(awake or found))

    def run(self) -> ExplorationReport:
        start = time.perf_counter()
        root = ExplorationNode(
            Execution(), config=initial_config(self.program, self.model),
            aux=initial_aux(self.model),
        )
        stack: list[ExplorationNode] = []
        if self.open(root):
            stack.append(root)
        while stack:
            node = stack[-1]
            if node.active is not None:
                node.sleep.add(node.active)
                node.active = None
            todo = node.backtrack - node.done - node.sleep
            if not todo:
                stack.pop()
                continue
            p = min(todo)
            node.done.add(p)
            node.active = p
            self.budget.spend()
            config, aux, events, races = _take(node.config, node.aux, p, self.model)
            child = ExplorationNode(
                node.prefix.extend(events), config=config, aux=aux,
                step_of=node.step_of + (len(stack) - 1,) * len(events),
            )
            for race in sorted(races, key=_race_key):
                self.reverse(stack, child, race)
            child.sleep = {q for q in node.sleep if self.independent(node, p, q)}
            if self.open(child):
                stack.append(child)
        self.report.nodes = self.budget.used
        self.report.wall_time = time.perf_counter() - start
        return self.report

    def open(self, node: ExplorationNode) -> bool:
        """Seed the node's backtrack set; False if it is a leaf."""
        choices = self.schedulable(node.config)
        if not choices:
            if _bound_hit(node.config):
                self.report.bound_exceeded += 1
            else:
                self.report.record(node.prefix, node.config)
            return False
        awake = [t for t in choices if t not in node.sleep]
        if not awake:
            self.report.sleep_blocked += 1
            return False
        node.backtrack.add(awake[0])
        return True


def dpor_explore(
    program: Program, model: MemoryModel, limits: Limits | None = None
) -> ExplorationReport:
    """Stateless DPOR; covers every chronological trace at least once."""
    return _Dpor(program, model, limits or Limits()).run()


def explore(
    program: Program, model: MemoryModel, limits: Limits | None = None, engine: str = "race"
) -> ExplorationReport:
    if engine == "none":
        return brute_force(program, model, limits)[0]
    if engine == "race":
        return dpor_explore(program, model, limits)
    raise ValueError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------------------
# Robustness
# ---------------------------------------------------------------------------


@dataclass
class RobustnessReport:
    counts: dict[MemoryModel, int]
    robust: dict[MemoryModel, bool]
    witnesses: dict[MemoryModel, tuple[list[ThreadId], ShashaSnirTrace] | None]

    @property
    def verdict(self) -> bool:
        return all(self.robust.values())

    def to_dict(self) -> dict:
        return {
            "counts": {str(m): c for m, c in self.counts.items()},
            "robust": {str(m): r for m, r in self.robust.items()},
            "verdict": "robust" if self.verdict else "not robust",
            "witnesses": {
                str(m): None if w is None else format_schedule(w[0])
                for m, w in self.witnesses.items()
            },
        }


def check_robustness(
    program: Program,
    against: Iterable[MemoryModel],
    limits: Limits | None = None,
    engine: str = "race",
) -> RobustnessReport:
    """Compare trace-class counts under each model with those under SC.

    Shasha-Snir traces do not mention update events, so they can be
    compared across models directly; a witness is a trace that SC lacks.
    """
    baseline = explore(program, MemoryModel.SC, limits, engine)
    sc_traces = baseline.shasha_snir_set()
    counts = {MemoryModel.SC: baseline.distinct_shasha_snir_traces}
    robust: dict[MemoryModel, bool] = {}
    witnesses: dict = {}
    for model in against:
        if model is MemoryModel.SC:
            continue
        report = explore(program, model, limits, engine)
        counts[model] = report.distinct_shasha_snir_traces
        robust[model] = counts[model] == counts[MemoryModel.SC]
        witnesses[model] = None
        if not robust[model]:
            for rep, ss in zip(report.representatives, report.shasha_snir_traces):
                if ss not in sc_traces:
                    witnesses[model] = (rep.schedule(), ss)
                    break
    return RobustnessReport(counts, robust, witnesses)


# ---------------------------------------------------------------------------
# Random programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomParams:
    threads: int = 3
    instrs: int = 5  # in total, over all threads
    locs: int = 2
    regs: int = 2
    fence_weight: float = 0.15

    def __post_init__(self) -> None:
        if not (1 <= self.threads <= self.instrs):
            raise ValueError("need 1 <= threads <= instrs")
        if self.locs < 1 or self.regs < 1:
            raise ValueError("need at least one location and one register")


_THREAD_NAMES = "pqrstuvw"
_LOC_NAMES = "xyzw"


def random_program(seed: int, params: RandomParams | None = None) -> Program:
    """Deterministic straight-line program of stores, loads and fences."""
    params = params or RandomParams()
    rng = random.Random(seed)
    n_threads = rng.randint(min(2, params.threads), params.threads)
    total = rng.randint(n_threads, params.instrs)
    locs = tuple(_LOC_NAMES[: rng.randint(1, params.locs)])
    sizes = [1] * n_threads
    for _ in range(total - n_threads):
        sizes[rng.randrange(n_threads)] += 1
    store_w = (1 - params.fence_weight) / 2
    threads = {}
    for name, size in zip(_THREAD_NAMES, sizes):
        body = []
        for _ in range(size):
            kind = rng.choices(("st", "ld", "f"), (store_w, store_w, params.fence_weight))[0]
            loc = rng.choice(locs)
            if kind == "st":
                body.append(Store(loc, rng.randint(1, 2)))
            elif kind == "ld":
                body.append(Load(f"r{rng.randrange(params.regs)}", loc))
            else:
                body.append(Fence())
        threads[name] = tuple(body)
    return Program(threads, locs)
