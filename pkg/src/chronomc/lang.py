"""Program representation and the litmus text format.

A litmus file looks like::

    locations x y
    thread p:
      store x 1
      load $r y
    thread q:
      store y 1
      load $s x
    final exists (p:$r == 0 and q:$s == 0)

Registers are written with a leading ``$``; every register and every
memory location starts out as 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple, Union

# Register names are plain strings (without the ``$``); constants are ints.
Operand = Union[str, int]

CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")
RESERVED_NAMES = frozenset({"upd"})

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


class LitmusSyntaxError(ValueError):
    """Raised for malformed litmus text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


def wrap64(value: int) -> int:
    return (value - INT_MIN) % 2**64 + INT_MIN


def compare(lhs: int, cmp: str, rhs: int) -> bool:
    if cmp == "==":
        return lhs == rhs
    if cmp == "!=":
        return lhs != rhs
    if cmp == "<":
        return lhs < rhs
    if cmp == "<=":
        return lhs <= rhs
    if cmp == ">":
        return lhs > rhs
    if cmp == ">=":
        return lhs >= rhs
    raise ValueError(f"unknown comparison {cmp!r}")


# ---------------------------------------------------------------------------
# Thread identifiers
# ---------------------------------------------------------------------------


class ThreadId(NamedTuple):
    """A real thread, or the auxiliary thread that flushes a store buffer.

    Field order makes the natural tuple ordering the scheduling tie-break:
    real threads by name, then auxiliary threads by owner, then location.
    """

    aux: bool
    owner: str
    loc: str = ""

    @classmethod
    def real(cls, name: str) -> ThreadId:
        return cls(False, name)

    @classmethod
    def upd(cls, owner: str, loc: str = "") -> ThreadId:
        return cls(True, owner, loc)

    def __str__(self) -> str:
        if not self.aux:
            return self.owner
        if self.loc:
            return f"upd({self.owner},{self.loc})"
        return f"upd({self.owner})"

    def __repr__(self) -> str:
        return f"ThreadId<{self}>"


_TID_RE = re.compile(r"^\s*(?:upd\(\s*(\w+)\s*(?:,\s*(\w+)\s*)?\)|(\w+))\s*$")


def parse_tid(text: str) -> ThreadId:
    m = _TID_RE.match(text)
    if not m:
        raise ValueError(f"bad thread id {text!r}")
    if m.group(3) is not None:
        return ThreadId.real(m.group(3))
    return ThreadId.upd(m.group(1), m.group(2) or "")


# ---------------------------------------------------------------------------
# Instructions
# ---------------------------------------------------------------------------


def _fmt_operand(op: Operand) -> str:
    return f"${op}" if isinstance(op, str) else str(op)


@dataclass(frozen=True)
class Store:
    loc: str
    value: Operand

    def __str__(self) -> str:
        return f"store {self.loc} {_fmt_operand(self.value)}"


@dataclass(frozen=True)
class Load:
    reg: str
    loc: str

    def __str__(self) -> str:
        return f"load ${self.reg} {self.loc}"


@dataclass(frozen=True)
class Fence:
    def __str__(self) -> str:
        return "fence"


@dataclass(frozen=True)
class Mov:
    reg: str
    value: Operand

    def __str__(self) -> str:
        return f"mov ${self.reg} {_fmt_operand(self.value)}"


@dataclass(frozen=True)
class Add:
    reg: str
    lhs: Operand
    rhs: Operand

    def __str__(self) -> str:
        return f"add ${self.reg} {_fmt_operand(self.lhs)} {_fmt_operand(self.rhs)}"


@dataclass(frozen=True)
class Bnz:
    reg: str
    label: str

    def __str__(self) -> str:
        return f"bnz ${self.reg} {self.label}"


@dataclass(frozen=True)
class Label:
    name: str

    def __str__(self) -> str:
        return f"{self.name}:"


@dataclass(frozen=True)
class Assume:
    reg: str
    cmp: str
    value: Operand

    def __str__(self) -> str:
        return f"assume ${self.reg} {self.cmp} {_fmt_operand(self.value)}"


@dataclass(frozen=True)
class Assert:
    reg: str
    cmp: str
    value: Operand

    def __str__(self) -> str:
        return f"assert ${self.reg} {self.cmp} {_fmt_operand(self.value)}"


@dataclass(frozen=True)
class Update:
    """Pseudo-instruction executed by an auxiliary thread."""

    loc: str

    def __str__(self) -> str:
        return f"upd {self.loc}"


Instruction = Union[Store, Load, Fence, Mov, Add, Bnz, Label, Assume, Assert]


def registers_read(instr: Instruction) -> list[str]:
    ops: list[Operand] = []
    if isinstance(instr, (Store, Mov)):
        ops = [instr.value]
    elif isinstance(instr, Add):
        ops = [instr.lhs, instr.rhs]
    elif isinstance(instr, Bnz):
        ops = [instr.reg]
    elif isinstance(instr, (Assume, Assert)):
        ops = [instr.reg, instr.value]
    return [op for op in ops if isinstance(op, str)]


# ---------------------------------------------------------------------------
# Final-state formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    thread: str
    reg: str
    cmp: str
    value: int

    def __str__(self) -> str:
        return f"{self.thread}:${self.reg} {self.cmp} {self.value}"


@dataclass(frozen=True)
class Not:
    operand: Formula

    def __str__(self) -> str:
        inner = self.operand
        text = str(inner)
        if isinstance(inner, (And, Or)):
            text = f"({text})"
        return f"not {text}"


@dataclass(frozen=True)
class And:
    lhs: Formula
    rhs: Formula

    def __str__(self) -> str:
        left = f"({self.lhs})" if isinstance(self.lhs, Or) else str(self.lhs)
        right = f"({self.rhs})" if isinstance(self.rhs, (And, Or)) else str(self.rhs)
        return f"{left} and {right}"


@dataclass(frozen=True)
class Or:
    lhs: Formula
    rhs: Formula

    def __str__(self) -> str:
        right = f"({self.rhs})" if isinstance(self.rhs, Or) else str(self.rhs)
        return f"{self.lhs} or {right}"


Formula = Union[Atom, Not, And, Or]


def evaluate(formula: Formula, registers: dict[str, dict[str, int]]) -> bool:
    """Evaluate over per-thread register files; unset registers read as 0."""
    if isinstance(formula, Atom):
        value = registers.get(formula.thread, {}).get(formula.reg, 0)
        return compare(value, formula.cmp, formula.value)
    if isinstance(formula, Not):
        return not evaluate(formula.operand, registers)
    if isinstance(formula, And):
        return evaluate(formula.lhs, registers) and evaluate(formula.rhs, registers)
    return evaluate(formula.lhs, registers) or evaluate(formula.rhs, registers)


def atoms(formula: Formula) -> list[Atom]:
    if isinstance(formula, Atom):
        return [formula]
    if isinstance(formula, Not):
        return atoms(formula.operand)
    return atoms(formula.lhs) + atoms(formula.rhs)


@dataclass(frozen=True)
class FinalCondition:
    quantifier: str  # "exists" | "forall"
    formula: Formula

    def __str__(self) -> str:
        return f"final {self.quantifier} {self.formula}"


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class Program:
    threads: dict[str, tuple[Instruction, ...]]
    locations: tuple[str, ...] = ()
    final: FinalCondition | None = None
    labels: dict[str, dict[str, int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        threads = {name: tuple(body) for name, body in self.threads.items()}
        object.__setattr__(self, "threads", threads)
        object.__setattr__(self, "locations", tuple(self.locations))
        if len(set(self.locations)) != len(self.locations):
            raise ProgramError("duplicate location declaration")
        declared = set(self.locations)
        labels: dict[str, dict[str, int]] = {}
        for name, body in threads.items():
            if name in RESERVED_NAMES:
                raise ProgramError(f"thread name {name!r} is reserved")
            table: dict[str, int] = {}
            for index, instr in enumerate(body):
                if isinstance(instr, Label):
                    if instr.name in table:
                        raise ProgramError(f"duplicate label {instr.name!r} in thread {name}")
                    table[instr.name] = index
                loc = getattr(instr, "loc", None)
                if loc is not None and loc not in declared:
                    raise ProgramError(f"undeclared location {loc!r} in thread {name}")
                if isinstance(instr, (Assume, Assert)) and instr.cmp not in CMP_OPS:
                    raise ProgramError(f"bad comparison {instr.cmp!r}")
            for instr in body:
                if isinstance(instr, Bnz) and instr.label not in table:
                    raise ProgramError(f"undefined label {instr.label!r} in thread {name}")
            labels[name] = table
        if self.final is not None:
            for atom in atoms(self.final.formula):
                if atom.thread not in threads:
                    raise ProgramError(f"final condition names unknown thread {atom.thread!r}")
        object.__setattr__(self, "labels", labels)

    @property
    def thread_names(self) -> list[str]:
        return sorted(self.threads)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_IDENT_RE = re.compile(rf"^{_IDENT}$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_TOKEN_RE = re.compile(rf"\s*(\$?{_IDENT}|[+-]?\d+|==|!=|<=|>=|<|>|\(|\)|:)")


def _tokenize(text: str, lineno: int, offset: int) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m:
            col = offset + pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise LitmusSyntaxError(f"unexpected character {text[pos:].lstrip()[0]!r}", lineno, col)
        tokens.append((m.group(1), offset + m.start(1) + 1))
        pos = m.end()
    return tokens


class _Cursor:
    def __init__(self, tokens: list[tuple[str, int]], lineno: int, end_col: int):
        self.tokens = tokens
        self.i = 0
        self.lineno = lineno
        self.end_col = end_col

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def col(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else self.end_col

    def error(self, message: str) -> LitmusSyntaxError:
        return LitmusSyntaxError(message, self.lineno, self.col())

    def take(self, what: str = "token") -> str:
        tok = self.peek()
        if tok is None:
            raise self.error(f"expected {what}, found end of line")
        self.i += 1
        return tok

    def expect(self, literal: str) -> None:
        if self.peek() != literal:
            raise self.error(f"expected {literal!r}")
        self.i += 1

    def ident(self) -> str:
        col = self.col()
        tok = self.take("identifier")
        if not _IDENT_RE.match(tok):
            raise LitmusSyntaxError(f"expected identifier, found {tok!r}", self.lineno, col)
        return tok

    def reg(self) -> str:
        col = self.col()
        tok = self.take("register")
        if not tok.startswith("$"):
            raise LitmusSyntaxError(f"expected register, found {tok!r}", self.lineno, col)
        return tok[1:]

    def integer(self) -> int:
        col = self.col()
        tok = self.take("integer")
        if not _INT_RE.match(tok):
            raise LitmusSyntaxError(f"expected integer, found {tok!r}", self.lineno, col)
        value = int(tok)
        if not INT_MIN <= value <= INT_MAX:
            raise LitmusSyntaxError("integer out of 64-bit range", self.lineno, col)
        return value

    def operand(self) -> Operand:
        tok = self.peek()
        if tok is not None and tok.startswith("$"):
            return self.reg()
        return self.integer()

    def cmp(self) -> str:
        col = self.col()
        tok = self.take("comparison")
        if tok not in CMP_OPS:
            raise LitmusSyntaxError(f"expected comparison, found {tok!r}", self.lineno, col)
        return tok

    def done(self) -> None:
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek()!r}")


def _parse_instr(cur: _Cursor) -> Instruction:
    head = cur.ident()
    if cur.peek() == ":":
        cur.take()
        return Label(head)
    if head == "store":
        return Store(cur.ident(), cur.operand())
    if head == "load":
        return Load(cur.reg(), cur.ident())
    if head == "fence":
        return Fence()
    if head == "mov":
        return Mov(cur.reg(), cur.operand())
    if head == "add":
        return Add(cur.reg(), cur.operand(), cur.operand())
    if head == "bnz":
        return Bnz(cur.reg(), cur.ident())
    if head == "assume":
        return Assume(cur.reg(), cur.cmp(), cur.operand())
    if head == "assert":
        return Assert(cur.reg(), cur.cmp(), cur.operand())
    cur.i -= 1
    raise cur.error(f"unknown instruction {head!r}")


def _parse_formula(cur: _Cursor) -> Formula:
    # precedence: not > and > or, binary operators left-associative
    def parse_or() -> Formula:
        node = parse_and()
        while cur.peek() == "or":
            cur.take()
            node = Or(node, parse_and())
        return node

    def parse_and() -> Formula:
        node = parse_unary()
        while cur.peek() == "and":
            cur.take()
            node = And(node, parse_unary())
        return node

    def parse_unary() -> Formula:
        tok = cur.peek()
        if tok == "not":
            cur.take()
            return Not(parse_unary())
        if tok == "(":
            cur.take()
            node = parse_or()
            cur.expect(")")
            return node
        thread = cur.ident()
        cur.expect(":")
        reg = cur.reg()
        op = cur.cmp()
        return Atom(thread, reg, op, cur.integer())

    return parse_or()


def parse_program(text: str) -> Program:
    """Parse litmus source text into a :class:`Program`."""
    locations: list[str] | None = None
    threads: dict[str, list[Instruction]] = {}
    current: list[Instruction] | None = None
    final: FinalCondition | None = None
    header_lines: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        tokens = _tokenize(line, lineno, 0)
        cur = _Cursor(tokens, lineno, len(line.rstrip()) + 1)
        if final is not None:
            raise cur.error("nothing may follow the final condition")
        head = cur.peek()
        if head == "locations":
            if locations is not None or threads:
                raise cur.error("'locations' must appear once, before all threads")
            cur.take()
            locations = []
            while cur.peek() is not None:
                locations.append(cur.ident())
            continue
        if locations is None:
            raise cur.error("expected 'locations' declaration")
        if head == "thread":
            cur.take()
            name_col = cur.col()
            name = cur.ident()
            cur.expect(":")
            cur.done()
            if name in threads:
                raise LitmusSyntaxError(
                    f"duplicate thread {name!r} (first defined on line {header_lines[name]})",
                    lineno,
                    name_col,
                )
            if name in RESERVED_NAMES:
                raise LitmusSyntaxError(f"thread name {name!r} is reserved", lineno, name_col)
            header_lines[name] = lineno
            current = threads[name] = []
            continue
        if head == "final":
            cur.take()
            quant = cur.take("'exists' or 'forall'")
            if quant not in ("exists", "forall"):
                cur.i -= 1
                raise cur.error("expected 'exists' or 'forall'")
            final = FinalCondition(quant, _parse_formula(cur))
            cur.done()
            continue
        if current is None:
            raise cur.error("instruction outside of a thread")
        current.append(_parse_instr(cur))
        cur.done()

    if locations is None:
        raise LitmusSyntaxError("missing 'locations' declaration", 1, 1)
    try:
        return Program(threads, tuple(locations), final)
    except ProgramError as exc:
        raise LitmusSyntaxError(str(exc)) from exc


def pretty_print(program: Program) -> str:
    """Canonical litmus text; ``parse_program`` inverts it exactly."""
    lines = [" ".join(["locations", *program.locations])]
    for name, body in program.threads.items():
        lines.append(f"thread {name}:")
        lines.extend(f"  {instr}" for instr in body)
    if program.final is not None:
        lines.append(str(program.final))
    return "\n".join(lines) + "\n"
