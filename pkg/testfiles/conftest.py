"""Shared networks and helpers for the test suite."""
from pathlib import Path

import numpy as np
import pytest

from bpkit.file_handler import load_evidence, load_network, parse_network
from bpkit.schemas import Evidence

NETWORKS = Path(__file__).resolve().parent.parent / "networks"

CHAIN_TEXT = """\
node A { 0 1 }
node B { 0 1 }
prior A ( 0.7 0.3 )
cpt B | A {
  ( 0.8 0.2 )
  ( 0.1 0.9 )
}
"""

CHAIN3_TEXT = """\
node A { t f }
node B { t f }
node C { t f }
prior A ( 0.3 0.7 )
cpt B | A {
  ( 0.9 0.1 )
  ( 0.2 0.8 )
}
cpt C | B {
  ( 0.6 0.4 )
  ( 0.25 0.75 )
}
"""

# Possibility degrees drawn from {0.2, 0.7, 1.0}
POSS_CHAIN_TEXT = """\
node A { 0 1 }
node B { 0 1 }
prior A ( 1.0 0.7 )
cpt B | A {
  ( 1.0 0.2 )
  ( 0.7 1.0 )
}
"""


@pytest.fixture
def chain():
    return parse_network(CHAIN_TEXT)


@pytest.fixture
def chain3():
    return parse_network(CHAIN3_TEXT)


@pytest.fixture
def poss_chain():
    return parse_network(POSS_CHAIN_TEXT, "possibilistic")


@pytest.fixture
def diamond():
    return load_network(NETWORKS / "diamond.net")


@pytest.fixture
def polytree():
    return load_network(NETWORKS / "polytree.net")


@pytest.fixture
def polytree_evidence(polytree):
    return load_evidence(NETWORKS / "polytree.ev", polytree)


def observe(**observations) -> Evidence:
    return Evidence(observations=observations)


def max_abs_diff(beliefs, reference) -> float:
    """Largest entrywise difference between two belief sets."""
    return max(
        float(np.max(np.abs(beliefs[x].as_array() - reference[x].as_array())))
        for x in reference
    )
