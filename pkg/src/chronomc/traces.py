"""Shasha-Snir traces and chronological traces of completed executions."""

from __future__ import annotations

import bisect
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import ClassVar, Iterable

from .lang import ThreadId
from .semantics import INITIAL, PENDING, Event, Execution, MemoryModel

Edge = tuple[Event, Event]


class NotCompleted(ValueError):
    """Some store of the execution never reached memory."""


class CycleDetected(RuntimeError):
    def __init__(self, witness: list[Event]):
        self.witness = witness
        super().__init__("cycle: " + " -> ".join(str(e) for e in witness))


def event_key(e: Event) -> tuple[ThreadId, int]:
    return (e.thread, e.index)


@dataclass(frozen=True, eq=False)
class Trace:
    RELATIONS: ClassVar[tuple[str, ...]] = ()
    KIND: ClassVar[str] = "trace"

    vertices: frozenset[Event]
    edges: dict[str, frozenset[Edge]]
    _key: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        key = (self.vertices, tuple(self.edges.get(r, frozenset()) for r in self.RELATIONS))
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return type(self) is type(other) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def all_edges(self) -> set[Edge]:
        out: set[Edge] = set()
        for rel in self.RELATIONS:
            out |= self.edges[rel]
        return out

    def sorted_vertices(self) -> list[Event]:
        return sorted(self.vertices, key=event_key)

    def labelled_edges(self) -> list[tuple[Event, Event, str]]:
        return [(a, b, rel) for rel in self.RELATIONS for a, b in self.edges[rel]]


class ChronologicalTrace(Trace):
    RELATIONS = ("po", "su", "uu", "src_ct", "cf_ct", "uf")
    KIND = "chronological"


class ShashaSnirTrace(Trace):
    RELATIONS = ("po", "st", "src_ss", "cf_ss")
    KIND = "shasha_snir"


# ---------------------------------------------------------------------------
# Shared bookkeeping
# ---------------------------------------------------------------------------


def _aux_key(event: Event, pso: bool) -> ThreadId:
    return ThreadId.upd(event.thread.owner, event.loc if pso else "")


class _Facts:
    """stupd/rowe and position tables for one execution, computed in one pass."""

    def __init__(self, execution: Execution, pso: bool):
        self.events = list(execution)
        self.pos: dict[Event, float] = execution.positions()
        stores: dict[ThreadId, list[Event]] = defaultdict(list)
        updates: dict[ThreadId, list[Event]] = defaultdict(list)
        self.updates_by_loc: dict[str, list[Event]] = defaultdict(list)
        for e in self.events:
            if e.is_store:
                stores[_aux_key(e, pso)].append(e)
            elif e.is_update:
                updates[e.thread].append(e)
                self.updates_by_loc[e.loc].append(e)
        self.stupd: dict[Event, Event] = {}
        for aux, seq in stores.items():
            ups = updates.get(aux, [])
            for k, s in enumerate(seq):
                self.stupd[s] = ups[k] if k < len(ups) else PENDING
        self.store_of = {u: s for s, u in self.stupd.items() if u is not PENDING}
        self.rowe: dict[Event, Event] = {}
        latest: dict[tuple[ThreadId, str], Event] = {}
        for e in self.events:
            if e.is_store:
                latest[(e.thread, e.loc)] = e
            elif e.is_load:
                s = latest.get((e.thread, e.loc))
                self.rowe[e] = INITIAL if s is None else self.stupd[s]
        self.update_pos = {x: [self.pos[u] for u in us] for x, us in self.updates_by_loc.items()}

    def require_completed(self) -> None:
        for s, u in self.stupd.items():
            if u is PENDING:
                raise NotCompleted(f"store {s} has no update")

    def first_update_after(self, loc: str, position: float) -> Event | None:
        ups = self.updates_by_loc.get(loc, [])
        i = bisect.bisect_right(self.update_pos.get(loc, []), position)
        return ups[i] if i < len(ups) else None

    def last_update_before(self, loc: str, position: float) -> Event | None:
        i = bisect.bisect_left(self.update_pos.get(loc, []), position)
        return self.updates_by_loc[loc][i - 1] if i > 0 else None

    def program_order(self, real_only: bool) -> frozenset[Edge]:
        last: dict[ThreadId, Event] = {}
        po = set()
        for e in self.events:
            if real_only and e.is_update:
                continue
            prev = last.get(e.thread)
            if prev is not None:
                po.add((prev, e))
            last[e.thread] = e
        return frozenset(po)


def _is_pso(execution: Execution, model: MemoryModel | None) -> bool:
    if model is not None:
        return model is MemoryModel.PSO
    return any(e.is_update and e.thread.loc for e in execution)


# ---------------------------------------------------------------------------
# Trace construction
# ---------------------------------------------------------------------------


def chronological_trace(execution: Execution, model: MemoryModel | None = None) -> ChronologicalTrace:
    """Chronological trace: all events, related by po, su, uu, src, cf and uf."""
    return _chronological(_facts_for(execution, model))


def shasha_snir_trace(execution: Execution, model: MemoryModel | None = None) -> ShashaSnirTrace:
    """Shasha-Snir trace: non-update events, related by po, st, src and cf."""
    return _shasha_snir(_facts_for(execution, model))


def both_traces(
    execution: Execution, model: MemoryModel | None = None
) -> tuple[ChronologicalTrace, ShashaSnirTrace]:
    """Both traces of one execution, sharing the bookkeeping pass."""
    f = _facts_for(execution, model)
    return _chronological(f), _shasha_snir(f)


def _facts_for(execution: Execution, model: MemoryModel | None) -> _Facts:
    f = _Facts(execution, _is_pso(execution, model))
    f.require_completed()
    return f


def _chronological(f: _Facts) -> ChronologicalTrace:
    pos = f.pos
    su = frozenset((s, u) for s, u in f.stupd.items())
    uu = set()
    for ups in f.updates_by_loc.values():
        uu.update(zip(ups, ups[1:]))
    src, cf, uf = set(), set(), set()
    last_aux_update: dict[ThreadId, Event] = {}
    for e in f.events:
        if e.is_update:
            last_aux_update[e.thread] = e
        elif e.is_load:
            r = f.rowe[e]
            u = f.last_update_before(e.loc, pos[e])
            if u is not None and pos[r] < pos[u]:
                src.add((u, e))
            nxt = f.first_update_after(e.loc, max(pos[e], pos[r]))
            if nxt is not None:
                cf.add((e, nxt))
        elif e.is_fence:
            for aux, u in last_aux_update.items():
                if aux.owner == e.thread.owner:
                    uf.add((u, e))
    return ChronologicalTrace(
        frozenset(f.events),
        {
            "po": f.program_order(real_only=False),
            "su": su,
            "uu": frozenset(uu),
            "src_ct": frozenset(src),
            "cf_ct": frozenset(cf),
            "uf": frozenset(uf),
        },
    )


def _shasha_snir(f: _Facts) -> ShashaSnirTrace:
    pos = f.pos
    by_loc: dict[str, list[Event]] = defaultdict(list)
    for s in f.stupd:
        by_loc[s.loc].append(s)
    st = set()
    successor: dict[Event, Event] = {}
    first_store: dict[str, Event] = {}
    for x, stores in by_loc.items():
        stores.sort(key=lambda s: pos[f.stupd[s]])
        st.update(zip(stores, stores[1:]))
        successor.update(zip(stores, stores[1:]))
        first_store[x] = stores[0]

    src, cf = set(), set()
    # per (thread, location), the latest store seen so far in program order
    own_latest: dict[tuple[ThreadId, str], Event] = {}
    for e in f.events:
        if e.is_store:
            own_latest[(e.thread, e.loc)] = e
        elif e.is_load:
            best = None
            u = f.last_update_before(e.loc, pos[e])
            if u is not None:
                best = f.store_of[u]
            own = own_latest.get((e.thread, e.loc))
            if own is not None and (best is None or pos[f.stupd[own]] > pos[f.stupd[best]]):
                best = own
            if best is not None:
                src.add((best, e))
                if best in successor:
                    cf.add((e, successor[best]))
            elif e.loc in first_store:
                cf.add((e, first_store[e.loc]))
    vertices = frozenset(e for e in f.events if not e.is_update)
    return ShashaSnirTrace(
        vertices,
        {
            "po": f.program_order(real_only=True),
            "st": frozenset(st),
            "src_ss": frozenset(src),
            "cf_ss": frozenset(cf),
        },
    )


def trace_equal(a: Trace, b: Trace) -> bool:
    if type(a) is not type(b):
        raise TypeError(f"cannot compare a {a.KIND} trace with a {b.KIND} trace")
    return a == b


# ---------------------------------------------------------------------------
# Happens-before
# ---------------------------------------------------------------------------


class HappensBefore:
    """Reflexive-transitive closure of a trace's edges, over its vertices."""

    def __init__(self, vertices: list[Event], reach: dict[Event, int]):
        self.vertices = vertices
        self._index = {e: i for i, e in enumerate(vertices)}
        self._reach = reach

    def __call__(self, a: Event, b: Event) -> bool:
        """True iff a happens before b or a == b."""
        return bool(self._reach[a] >> self._index[b] & 1)

    def strictly(self, a: Event, b: Event) -> bool:
        return a != b and self(a, b)

    def pairs(self) -> set[Edge]:
        out = set()
        for a in self.vertices:
            bits = self._reach[a]
            for b in self.vertices:
                if a != b and bits >> self._index[b] & 1:
                    out.add((a, b))
        return out

    def successors(self, a: Event) -> list[Event]:
        bits = self._reach[a]
        return [b for b in self.vertices if b != a and bits >> self._index[b] & 1]


def find_cycle(trace: Trace) -> list[Event] | None:
    """A cycle of the trace's edge relation as a vertex list, or None."""
    succ: dict[Event, list[Event]] = defaultdict(list)
    for a, b in trace.all_edges():
        succ[a].append(b)
    for a in succ:
        succ[a].sort(key=event_key)
    colour: dict[Event, int] = {}
    for root in trace.sorted_vertices():
        if root in colour:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        colour[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = 2
                stack.pop()
                path.pop()
                continue
            c = colour.get(nxt, 0)
            if c == 1:
                return path[path.index(nxt):] + [nxt]
            if c == 0:
                colour[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
                path.append(nxt)
    return None


def happens_before(trace: Trace) -> HappensBefore:
    """Closure of the trace's edges; raises CycleDetected if they are cyclic."""
    witness = find_cycle(trace)
    if witness is not None:
        raise CycleDetected(witness)
    vertices = trace.sorted_vertices()
    index = {e: i for i, e in enumerate(vertices)}
    succ: dict[Event, list[Event]] = defaultdict(list)
    indeg = {e: 0 for e in vertices}
    for a, b in trace.all_edges():
        succ[a].append(b)
        indeg[b] += 1
    order = []
    ready = [e for e in vertices if indeg[e] == 0]
    while ready:
        e = ready.pop()
        order.append(e)
        for b in succ[e]:
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    reach: dict[Event, int] = {}
    for e in reversed(order):
        bits = 1 << index[e]
        for b in succ[e]:
            bits |= reach[b]
        reach[e] = bits
    return HappensBefore(vertices, reach)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _node_label(e: Event) -> str:
    return f"{e.thread}:{e.index} {e.instr}"


def to_dot(trace: Trace, name: str = "trace") -> str:
    vertices = trace.sorted_vertices()
    ids = {e: f"n{i}" for i, e in enumerate(vertices)}
    lines = [f"digraph {name} {{"]
    for e in vertices:
        label = _node_label(e).replace('"', '\\"')
        lines.append(f'  {ids[e]} [label="{label}"];')
    edges = sorted(trace.labelled_edges(), key=lambda t: (event_key(t[0]), event_key(t[1]), t[2]))
    for a, b, rel in edges:
        lines.append(f'  {ids[a]} -> {ids[b]} [label="{rel}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json_dict(trace: Trace) -> dict:
    vertices = trace.sorted_vertices()
    ids = {e: i for i, e in enumerate(vertices)}
    return {
        "kind": trace.KIND,
        "vertices": [
            {"thread": str(e.thread), "instr": str(e.instr), "index": e.index} for e in vertices
        ],
        "edges": {
            rel: sorted([ids[a], ids[b]] for a, b in trace.edges[rel]) for rel in trace.RELATIONS
        },
    }


def to_json(trace: Trace) -> str:
    return json.dumps(to_json_dict(trace), indent=2, sort_keys=True)


def traces_of(executions: Iterable[Execution], model: MemoryModel) -> list[ChronologicalTrace]:
    return [chronological_trace(x, model) for x in executions]
