import numpy as np
import pytest

from libs.cayley import boost_richness, build_covering
from libs.kripke import ck_expand, s5_from_blocks, validate_s5


def make(edges, n, props=None, agents=("a", "b")):
    """S5 structure from per-agent pair lists, failing loudly on bad input."""
    result = validate_s5(edges, n, props or {}, agents=list(agents),
                         prop_names=sorted(props) if props else None)
    assert not hasattr(result, "missing_pairs"), result
    return result


@pytest.fixture
def chain3():
    """0 -a- 1 -b- 2, p0 true at 0 only."""
    return make({"a": [(0, 1)], "b": [(1, 2)]}, 3, {"p0": [0]})


@pytest.fixture
def twin():
    """Two worlds in one class for both agents: a coset 2-cycle."""
    return make({"a": [(0, 1)], "b": [(0, 1)]}, 2, {"p0": []})


@pytest.fixture
def singleton():
    return make({"a": [], "b": []}, 1, {"p0": [0]})


@pytest.fixture
def lonely():
    """One world, one agent, one false proposition."""
    return s5_from_blocks(("a",), np.zeros((1, 1), dtype=np.int64), np.zeros((1, 1), dtype=bool))


@pytest.fixture
def z2(lonely):
    """Group Z2 on one agent: two worlds in one class."""
    return build_covering(lonely, 0, "full")


@pytest.fixture
def z2x2(lonely):
    """Z2 x Z2 on one agent: four worlds in one class."""
    return boost_richness(lonely, 0, k=1)


@pytest.fixture
def chain3_ck(chain3):
    return ck_expand(chain3)
