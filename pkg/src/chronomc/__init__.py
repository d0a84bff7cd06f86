"""Stateless model checking for SC, TSO and PSO with chronological traces."""

from __future__ import annotations

from importlib import resources

from .lang import Program, parse_program, pretty_print
from .semantics import Execution, MemoryModel, run
from .explore import (
    ExplorationReport,
    Limits,
    LimitExceeded,
    brute_force,
    check_robustness,
    dpor_explore,
)
from .traces import chronological_trace, happens_before, shasha_snir_trace

CORPUS = ("sb", "sb_fenced", "mp", "mp_fenced", "fwd", "peterson")


def corpus_text(name: str) -> str:
    """Source of a bundled litmus test."""
    return resources.files(__package__).joinpath("corpus", f"{name}.lit").read_text()


def load_corpus(name: str) -> Program:
    return parse_program(corpus_text(name))


__all__ = [
    "CORPUS",
    "Execution",
    "ExplorationReport",
    "LimitExceeded",
    "Limits",
    "MemoryModel",
    "Program",
    "brute_force",
    "check_robustness",
    "chronological_trace",
    "corpus_text",
    "dpor_explore",
    "happens_before",
    "load_corpus",
    "parse_program",
    "pretty_print",
    "run",
    "shasha_snir_trace",
]
