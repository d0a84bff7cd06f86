"""Operational semantics for SC, TSO and PSO.

Stores go into a FIFO buffer and reach memory through update events
performed by auxiliary threads: ``upd(p)`` under TSO (one buffer per
thread) and ``upd(p,x)`` under PSO (one buffer per thread and location).
SC reuses the TSO machinery with the extra rule that a pending update must
be flushed before anything else runs, so every store is immediately
followed by its own update.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .lang import (
    Add,
    Assert,
    Assume,
    Bnz,
    Fence,
    Instruction,
    Label,
    Load,
    Mov,
    Operand,
    Program,
    Store,
    ThreadId,
    Update,
    compare,
    parse_tid,
    wrap64,
)


class MemoryModel(enum.Enum):
    SC = "sc"
    TSO = "tso"
    PSO = "pso"

    def __str__(self) -> str:
        return self.name

    @classmethod
    def parse(cls, text: str) -> MemoryModel:
        return cls(text.strip().lower())


RUNNING = "running"
FINISHED = "finished"
BLOCKED = "blocked"
VIOLATED = "violated"


class ScheduleInfeasible(Exception):
    def __init__(self, position: int, tid: ThreadId):
        self.position = position
        self.tid = tid
        super().__init__(f"{tid} is not enabled at schedule position {position}")


class ContractViolation(Exception):
    """A caller broke an operation's precondition."""


# ---------------------------------------------------------------------------
# Events and executions
# ---------------------------------------------------------------------------


class Event(NamedTuple):
    thread: ThreadId | None
    instr: Instruction | Update | None
    index: int

    def __hash__(self) -> int:
        # (thread, index) already identifies an event within an execution
        return hash((self.thread, self.index))

    def __str__(self) -> str:
        if self.thread is None:
            return "e0" if self.index < 0 else "e_inf"
        return f"({self.thread}, {self.instr}, {self.index})"

    @property
    def is_update(self) -> bool:
        return isinstance(self.instr, Update)

    @property
    def is_store(self) -> bool:
        return isinstance(self.instr, Store)

    @property
    def is_load(self) -> bool:
        return isinstance(self.instr, Load)

    @property
    def is_fence(self) -> bool:
        return isinstance(self.instr, Fence)

    @property
    def loc(self) -> str | None:
        return getattr(self.instr, "loc", None)

    @property
    def owner(self) -> str | None:
        return None if self.thread is None else self.thread.owner


# Dummy events bracketing every execution.
INITIAL = Event(None, None, -1)
PENDING = Event(None, None, 2**62)


@dataclass(frozen=True)
class Execution:
    events: tuple[Event, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def positions(self) -> dict[Event, float]:
        pos: dict[Event, float] = {e: i for i, e in enumerate(self.events)}
        pos[INITIAL] = -1
        pos[PENDING] = math.inf
        return pos

    def schedule(self) -> list[ThreadId]:
        return [e.thread for e in self.events]

    def extend(self, events: Iterable[Event]) -> Execution:
        return Execution(self.events + tuple(events))


def format_schedule(schedule: Iterable[ThreadId]) -> str:
    return ",".join(str(t) for t in schedule)


def parse_schedule(text: str) -> list[ThreadId]:
    parts: list[str] = []
    depth = 0
    token = ""
    for ch in text:
        if ch == "," and depth == 0:
            parts.append(token)
            token = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        token += ch
    if token.strip():
        parts.append(token)
    return [parse_tid(p) for p in parts if p.strip()]


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


@dataclass
class Configuration:
    """Global state. Treated as a value: ``step`` never mutates its input."""

    registers: dict[str, dict[str, int]]
    pcs: dict[str, int]
    status: dict[str, str]
    buffers: dict[ThreadId, tuple[tuple[str, int], ...]]
    memory: dict[str, int]
    counts: dict[ThreadId, int]
    program: Program = field(repr=False, compare=False, default=None)

    def copy(self) -> Configuration:
        return Configuration(
            dict(self.registers),
            dict(self.pcs),
            dict(self.status),
            dict(self.buffers),
            dict(self.memory),
            dict(self.counts),
            self.program,
        )

    def buffer_lookup(self, tid: str, loc: str, model: MemoryModel) -> int | None:
        """Value of the newest buffered store to ``loc`` by ``tid``, if any."""
        buf = self.buffers[_buffer_of(tid, loc, model)]
        for bloc, value in reversed(buf):
            if bloc == loc:
                return value
        return None

    def own_buffers(self, tid: str) -> list[tuple[tuple[str, int], ...]]:
        return [buf for aux, buf in self.buffers.items() if aux.owner == tid]

    def next_instruction(self, tid: str) -> Instruction | None:
        body = self.program.threads[tid]
        pc = self.pcs[tid]
        return body[pc] if pc < len(body) else None

    def final_state(self) -> tuple:
        regs = tuple(
            (t, tuple(sorted((r, v) for r, v in self.registers[t].items() if v != 0)))
            for t in sorted(self.registers)
        )
        mem = tuple(sorted(self.memory.items()))
        return regs, mem


def _buffer_of(tid: str, loc: str, model: MemoryModel) -> ThreadId:
    if model is MemoryModel.PSO:
        return ThreadId.upd(tid, loc)
    return ThreadId.upd(tid)


def aux_threads(program: Program, model: MemoryModel) -> list[ThreadId]:
    if model is MemoryModel.PSO:
        return [ThreadId.upd(t, x) for t in program.thread_names for x in sorted(program.locations)]
    return [ThreadId.upd(t) for t in program.thread_names]


def _skip_labels(program: Program, tid: str, pc: int) -> int:
    body = program.threads[tid]
    while pc < len(body) and isinstance(body[pc], Label):
        pc += 1
    return pc


def initial_config(program: Program, model: MemoryModel) -> Configuration:
    pcs = {t: _skip_labels(program, t, 0) for t in program.threads}
    status = {t: RUNNING if pcs[t] < len(program.threads[t]) else FINISHED for t in program.threads}
    return Configuration(
        registers={t: {} for t in program.threads},
        pcs=pcs,
        status=status,
        buffers={aux: () for aux in aux_threads(program, model)},
        memory={x: 0 for x in program.locations},
        counts={},
        program=program,
    )


def enabled(config: Configuration, model: MemoryModel) -> list[ThreadId]:
    """Thread ids that can take a step, in scheduling order."""
    program = config.program
    pending = [aux for aux, buf in config.buffers.items() if buf]
    if model is MemoryModel.SC and pending:
        # at most one, holding the store just executed
        return sorted(pending)
    result = []
    for tid in sorted(program.threads):
        if config.status[tid] != RUNNING:
            continue
        instr = program.threads[tid][config.pcs[tid]]
        if isinstance(instr, Fence) and any(config.own_buffers(tid)):
            continue
        result.append(ThreadId.real(tid))
    result.extend(sorted(pending))
    return result


def _value(regs: dict[str, int], op: Operand) -> int:
    return regs.get(op, 0) if isinstance(op, str) else op


def step(config: Configuration, tid: ThreadId, model: MemoryModel) -> tuple[Configuration, Event]:
    """Execute one transition of ``tid``; the caller guarantees it is enabled."""
    if tid not in enabled(config, model):
        raise ContractViolation(f"{tid} is not enabled")
    return apply_step(config, tid, model)


def apply_step(config: Configuration, tid: ThreadId, model: MemoryModel) -> tuple[Configuration, Event]:
    # unchecked variant of step() for the exploration engines
    program = config.program
    new = config.copy()
    index = config.counts.get(tid, 0) + 1
    new.counts[tid] = index

    if tid.aux:
        (loc, value), *rest = config.buffers[tid]
        new.buffers[tid] = tuple(rest)
        new.memory[loc] = value
        return new, Event(tid, Update(loc), index)

    name = tid.owner
    instr = program.threads[name][config.pcs[name]]
    regs = config.registers[name]
    pc = config.pcs[name] + 1
    new_regs = regs

    if isinstance(instr, Store):
        aux = _buffer_of(name, instr.loc, model)
        new.buffers[aux] = config.buffers[aux] + ((instr.loc, _value(regs, instr.value)),)
    elif isinstance(instr, Load):
        value = config.buffer_lookup(name, instr.loc, model)
        if value is None:
            value = config.memory[instr.loc]
        new_regs = {**regs, instr.reg: value}
    elif isinstance(instr, Mov):
        new_regs = {**regs, instr.reg: _value(regs, instr.value)}
    elif isinstance(instr, Add):
        new_regs = {**regs, instr.reg: wrap64(_value(regs, instr.lhs) + _value(regs, instr.rhs))}
    elif isinstance(instr, Bnz):
        if regs.get(instr.reg, 0) != 0:
            pc = program.labels[name][instr.label]
    elif isinstance(instr, Assume):
        if not compare(regs.get(instr.reg, 0), instr.cmp, _value(regs, instr.value)):
            new.status[name] = BLOCKED
    elif isinstance(instr, Assert):
        if not compare(regs.get(instr.reg, 0), instr.cmp, _value(regs, instr.value)):
            new.status[name] = VIOLATED
    # Fence: enabledness already checked; nothing else changes.

    new.registers[name] = new_regs
    pc = _skip_labels(program, name, pc)
    new.pcs[name] = pc
    if new.status[name] == RUNNING and pc >= len(program.threads[name]):
        new.status[name] = FINISHED
    return new, Event(tid, instr, index)


def run(
    program: Program, schedule: Sequence[ThreadId], model: MemoryModel
) -> tuple[Execution, Configuration]:
    config = initial_config(program, model)
    events = []
    for position, tid in enumerate(schedule):
        if tid not in enabled(config, model):
            raise ScheduleInfeasible(position, tid)
        config, event = apply_step(config, tid, model)
        events.append(event)
    return Execution(tuple(events)), config


def drain(config: Configuration, model: MemoryModel) -> tuple[list[Event], Configuration]:
    """Flush every pending store, auxiliary threads in scheduling order."""
    events = []
    for aux in sorted(config.buffers):
        while config.buffers[aux]:
            config, event = apply_step(config, aux, model)
            events.append(event)
    return events, config


def complete(execution: Execution, config: Configuration, model: MemoryModel) -> Execution:
    """Append the updates still pending at the end of ``execution``."""
    events, _ = drain(config, model)
    return execution.extend(events)


def is_completed(execution: Execution, model: MemoryModel | None = None) -> bool:
    return all(stupd(execution, e, model) is not PENDING for e in execution if e.is_store)


# ---------------------------------------------------------------------------
# Store/update correspondence
# ---------------------------------------------------------------------------


def _aux_for(event: Event, pso: bool) -> ThreadId:
    return ThreadId.upd(event.thread.owner, event.loc if pso else "")


def _is_pso(execution: Execution) -> bool:
    return any(e.is_update and e.thread.loc for e in execution)


def _pso_flag(execution: Execution, model: MemoryModel | None) -> bool:
    if model is None:
        return _is_pso(execution)
    return model is MemoryModel.PSO


def stupd(execution: Execution, store: Event, model: MemoryModel | None = None) -> Event:
    """The update event that flushes ``store``, or ``PENDING``."""
    pso = _pso_flag(execution, model)
    k = 0
    for e in execution:
        if e.thread == store.thread and e.is_store and (not pso or e.loc == store.loc):
            if e.index <= store.index:
                k += 1
    aux = _aux_for(store, pso)
    for e in execution:
        if e.thread == aux and e.index == k:
            return e
    return PENDING


def rowe(execution: Execution, load: Event, model: MemoryModel | None = None) -> Event:
    """Update of the latest same-thread store to the loaded location, or ``INITIAL``."""
    latest = None
    for e in execution:
        if e.thread == load.thread and e.is_store and e.loc == load.loc and e.index < load.index:
            if latest is None or e.index > latest.index:
                latest = e
    if latest is None:
        return INITIAL
    return stupd(execution, latest, model)
