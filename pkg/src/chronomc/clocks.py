"""On-the-fly chronological happens-before via vector clocks.

The auxiliary configuration runs in lock-step with the semantics: it keeps
a clock per thread and per event, a mirror of every store buffer whose
entries remember the latest load forwarded from them, and per location the
latest update plus the latest reader of each thread. Loads satisfied by
buffer forwarding are not synchronised when they execute; they join the
location's reader set only when their buffer entry reaches memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

from .lang import ThreadId
from .semantics import Event, Execution, MemoryModel


class DesyncError(RuntimeError):
    """The mirrored buffers disagree with the event stream."""


class VectorClock:
    """Immutable map from thread id to event count; missing entries are 0."""

    __slots__ = ("_c",)

    def __init__(self, entries: Mapping[ThreadId, int] | None = None):
        self._c = {t: v for t, v in (entries or {}).items() if v}

    def __getitem__(self, tid: ThreadId) -> int:
        return self._c.get(tid, 0)

    def __add__(self, other: VectorClock) -> VectorClock:
        return clock_join(self, other)

    def __le__(self, other: VectorClock) -> bool:
        return all(v <= other._c.get(t, 0) for t, v in self._c.items())

    def __lt__(self, other: VectorClock) -> bool:
        return self <= other and self != other

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorClock):
            return NotImplemented
        return self._c == other._c

    def __hash__(self) -> int:
        return hash(frozenset(self._c.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{t}:{v}" for t, v in sorted(self._c.items()))
        return f"VectorClock({{{inner}}})"

    def set(self, tid: ThreadId, value: int) -> VectorClock:
        c = dict(self._c)
        c[tid] = value
        return VectorClock(c)

    def items(self):
        return self._c.items()

    def threads(self) -> set[ThreadId]:
        return set(self._c)


ZERO = VectorClock()


def clock_join(a: VectorClock, b: VectorClock) -> VectorClock:
    """Pointwise maximum."""
    if not b._c:
        return a
    if not a._c:
        return b
    c = dict(a._c)
    for t, v in b._c.items():
        if v > c.get(t, 0):
            c[t] = v
    return VectorClock(c)


def join_all(clocks: Iterable[VectorClock]) -> VectorClock:
    out = ZERO
    for c in clocks:
        out = clock_join(out, c)
    return out


class Race(NamedTuple):
    earlier: Event
    later: Event


# An entry of a mirrored store buffer: location, the store that produced it,
# and the latest load forwarded from it (None if none).
BufferEntry = tuple[str, Event, "Event | None"]


@dataclass(frozen=True)
class AuxConfig:
    model: MemoryModel
    thread_clocks: dict[ThreadId, VectorClock] = field(default_factory=dict)
    event_clocks: dict[Event, VectorClock] = field(default_factory=dict)
    buffers: dict[ThreadId, tuple[BufferEntry, ...]] = field(default_factory=dict)
    # location -> (latest update or None, latest reader per thread)
    memory: dict[str, tuple[Event | None, dict[ThreadId, Event]]] = field(default_factory=dict)

    def clock(self, key: ThreadId | Event | None) -> VectorClock:
        if key is None:
            return ZERO
        if isinstance(key, Event):
            return self.event_clocks[key]
        return self.thread_clocks.get(key, ZERO)

    def buffer_key(self, owner: str, loc: str) -> ThreadId:
        return ThreadId.upd(owner, loc if self.model is MemoryModel.PSO else "")


def initial_aux(model: MemoryModel) -> AuxConfig:
    return AuxConfig(model)


def _owner_of(e: Event) -> str:
    return e.thread.owner


def aux_step(aux: AuxConfig, event: Event) -> tuple[AuxConfig, frozenset[Race]]:
    """Advance the auxiliary configuration by one event; return its races."""
    p = event.thread
    j = aux.clock(p)[p] + 1
    if j != event.index:
        raise DesyncError(f"{event}: expected index {j}")
    cp = aux.clock(p).set(p, j)
    buffers = aux.buffers
    memory = aux.memory
    races: frozenset[Race] = frozenset()

    if event.is_store:
        key = aux.buffer_key(p.owner, event.loc)
        buffers = {**buffers, key: buffers.get(key, ()) + ((event.loc, event, None),)}
        new_clock = cp

    elif event.is_load:
        x = event.loc
        key = aux.buffer_key(p.owner, x)
        entries = buffers.get(key, ())
        hit = max((i for i, ent in enumerate(entries) if ent[0] == x), default=None)
        if hit is None:
            e_u, readers = memory.get(x, (None, {}))
            new_clock = cp
            if e_u is not None and _owner_of(e_u) != p.owner:
                cu = aux.clock(e_u)
                new_clock = cp + cu
                if not cu <= cp:
                    races = frozenset({Race(e_u, event)})
            memory = {**memory, x: (e_u, {**readers, p: event})}
        else:
            loc, store, _ = entries[hit]
            entries = entries[:hit] + ((loc, store, event),) + entries[hit + 1 :]
            buffers = {**buffers, key: entries}
            new_clock = cp

    elif event.is_fence:
        new_clock = cp
        for tid, c in aux.thread_clocks.items():
            if tid.aux and tid.owner == p.owner:
                new_clock = new_clock + c

    elif event.is_update:
        x = event.loc
        entries = buffers.get(p, ())
        if not entries or entries[0][0] != x:
            raise DesyncError(f"{event}: buffer head is {entries[0] if entries else 'empty'}")
        (_, e_s, e_r), rest = entries[0], entries[1:]
        buffers = {**buffers, p: rest}
        e_u, readers = memory.get(x, (None, {}))
        joined = [e_l for e_l in readers.values() if e_l.thread.owner != p.owner]
        if e_u is not None:
            joined.append(e_u)
        base = cp + aux.clock(e_s)
        new_clock = base + join_all(aux.clock(e) for e in joined)
        found = set()
        for cand in joined:
            if cand.thread == p or cand.thread.owner == p.owner:
                continue
            others = base + join_all(aux.clock(e) for e in joined if e != cand)
            if not aux.clock(cand) <= others:
                found.add(Race(cand, event))
        races = frozenset(found)
        new_readers = readers if e_r is None else {**readers, e_r.thread: e_r}
        memory = {**memory, x: (event, new_readers)}

    else:
        # thread-local instruction
        new_clock = cp

    thread_clocks = {**aux.thread_clocks, p: new_clock}
    event_clocks = {**aux.event_clocks, event: new_clock}
    return AuxConfig(aux.model, thread_clocks, event_clocks, buffers, memory), races


def races_of(
    execution: Execution, model: MemoryModel, aux: AuxConfig | None = None
) -> tuple[list[tuple[Event, frozenset[Race]]], dict[Event, VectorClock]]:
    """Fold aux_step over an execution (or a prefix of one)."""
    aux = aux or initial_aux(model)
    out = []
    for e in execution:
        aux, r = aux_step(aux, e)
        out.append((e, r))
    return out, aux.event_clocks


def clock_precedes(clocks: Mapping[Event, VectorClock], a: Event, b: Event) -> bool:
    """a happens before b (strictly), judged by their clocks."""
    return a != b and clocks[a] <= clocks[b]


def clock_table(execution: Execution, clocks: Mapping[Event, VectorClock]) -> str:
    """Per-event clocks as TSV: one row per event, one column per thread id."""
    tids = sorted({t for c in clocks.values() for t in c.threads()} | {e.thread for e in execution})
    rows = ["\t".join(["event", *map(str, tids)])]
    for e in execution:
        c = clocks[e]
        rows.append("\t".join([str(e), *(str(c[t]) for t in tids)]))
    return "\n".join(rows) + "\n"
