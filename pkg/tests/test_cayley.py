import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from libs.acyclicity import acyclicity_level, is_n_acyclic
from libs.bisim import check_covering
from libs.cayley import (
    boost_richness,
    build_covering,
    check_richness,
    left_translation,
    make_generators,
    richness_level,
    tree_unfold,
)
from libs.corpus import random_s5
from libs.errors import GroupTooLarge, NotConnected
from libs.kripke import disjoint_union


def test_generators(chain3):
    spanning = make_generators(chain3, "spanning")
    assert [(g.pair, g.agent) for g in spanning] == [((0, 1), 0), ((1, 2), 1)]
    assert len(make_generators(chain3, "full")) == 8
    assert len(make_generators(chain3, "spanning", k_copies=2)) == 6
    with pytest.raises(ValueError):
        make_generators(chain3, "sparse")


def test_spanning_cover_of_chain(chain3):
    c = build_covering(chain3, 0, "spanning")
    assert c.n_worlds == 12
    assert sorted(set(int(x) for x in c.world_map)) == [0, 1, 2]
    assert check_covering(c.covering())
    assert is_n_acyclic(c, 6)


def test_single_loop_gives_z2(z2, lonely):
    assert z2.n_worlds == 2
    assert z2.n_classes(1) == 1
    assert check_covering(z2.covering())
    assert z2.covering_dict()["map"] == [0, 0]


def test_boost_adds_copies(z2x2, lonely):
    assert z2x2.n_worlds == 4
    assert len(z2x2.generators) == 2
    assert check_covering(z2x2.covering())


def test_richness(z2, z2x2):
    assert richness_level(z2) == 2
    assert richness_level(z2x2) == 4
    assert check_richness(z2x2, 4).ok
    report = check_richness(z2, 3)
    assert not report.ok
    assert report.count == 2
    assert check_richness(z2, 1).ok


def test_left_translation(z2):
    shift = left_translation(z2, z2.elements[1])
    assert list(shift) == [1, 0]


def test_tree_unfold_counts(singleton):
    t = tree_unfold(singleton, 0, depth=3, edge_set="full", k_copies=1)
    assert t.n_worlds == 53
    assert t.truncated == 3
    assert acyclicity_level(t, 5) == 5
    with pytest.raises(ValueError):
        left_translation(t, t.elements[1])
    with pytest.raises(ValueError):
        tree_unfold(singleton, 0, depth=0)


def test_cover_rejects_disconnected(chain3, singleton):
    with pytest.raises(NotConnected):
        build_covering(disjoint_union(chain3, singleton))


def test_group_cap(chain3):
    with pytest.raises(GroupTooLarge):
        build_covering(chain3, 0, "spanning", cap=5)


@pytest.mark.property_based
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 3), copies=st.integers(0, 1))
def test_spanning_covers_are_bisimilar(seed, n, copies):
    m = random_s5(np.random.default_rng(seed), n, 2)
    c = build_covering(m, 0, "spanning", copies, cap=5000)
    assert check_covering(c.covering())
    assert c.covering_dict()["map"] == [int(x) for x in c.world_map]
