from __future__ import annotations

import pytest

from chronomc import CORPUS, load_corpus
from chronomc.lang import parse_program
from chronomc.semantics import MemoryModel, parse_schedule, run

SC, TSO, PSO = MemoryModel.SC, MemoryModel.TSO, MemoryModel.PSO
ALL_MODELS = (SC, TSO, PSO)

# Schedule of the store-buffering execution in which both loads read 0.
SB_WEAK_SCHEDULE = "p,p,q,upd(q),q,upd(p)"


@pytest.fixture(scope="session")
def corpus():
    return {name: load_corpus(name) for name in CORPUS}


@pytest.fixture(scope="session")
def sb():
    return load_corpus("sb")


@pytest.fixture(scope="session")
def mp():
    return load_corpus("mp")


@pytest.fixture(scope="session")
def fwd():
    return load_corpus("fwd")


@pytest.fixture(scope="session")
def sb_weak(sb):
    """The store-buffering execution ending with r = s = 0, under TSO."""
    execution, config = run(sb, parse_schedule(SB_WEAK_SCHEDULE), TSO)
    return execution, config


@pytest.fixture
def single_thread():
    return parse_program(
        """locations x y
thread p:
  store x 1
  load $a x
  store y 2
  fence
  load $b y
"""
    )


def ev(execution, text):
    """Find the unique event whose string form contains ``text``."""
    hits = [e for e in execution if text in str(e)]
    assert len(hits) == 1, (text, [str(e) for e in hits])
    return hits[0]
