import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from libs.bisim import (
    CoveringMap,
    bisimulation_classes,
    check_covering,
    coarsest_bisimulation,
    is_covering,
    l_bisimilar,
    refinement_levels,
)
from libs.corpus import random_s5
from libs.errors import NotBisimilar, NotHomomorphism, NotSurjective, SignatureMismatch
from libs.kripke import ck_expand, s5_from_blocks
from tests.conftest import make
from tests.oracles import bounded_bisimilar, naive_bisimulation


def test_cover_of_singleton_is_bisimilar(lonely, z2):
    part = coarsest_bisimulation(z2, lonely)
    assert part.same(0, 0) and part.same(1, 0)
    assert part.mode == "ck"


def test_atoms_split_chain(chain3):
    labels = bisimulation_classes(ck_expand(chain3))
    assert labels[0] != labels[1]
    assert labels[0] != labels[2]


def test_s5_mode_is_coarser_or_equal(chain3):
    ck = ck_expand(chain3)
    s5 = bisimulation_classes(ck, mode="s5")
    full = bisimulation_classes(ck, mode="ck")
    for x in range(3):
        for y in range(3):
            if full[x] == full[y]:
                assert s5[x] == s5[y]


def test_signature_mismatch(chain3, lonely):
    with pytest.raises(SignatureMismatch):
        coarsest_bisimulation(chain3, lonely)


def test_levels_are_monotone(chain3):
    levels = refinement_levels(ck_expand(chain3), 4)
    assert len(levels) == 5
    counts = [len(set(map(int, lv))) for lv in levels]
    assert counts == sorted(counts)


def test_bounded_bisimilarity_on_paths():
    # a-path of length 3 with p0 at one end versus a single a-class
    long = make({"a": [(0, 1)], "b": [(1, 2)]}, 3, {"p0": [2]})
    short = make({"a": [], "b": [(0, 1)]}, 2, {"p0": [1]})
    assert l_bisimilar(long, 1, short, 0, 1)
    assert l_bisimilar(long, 1, short, 0, 3) == bounded_bisimilar(long, 1, short, 0, 3)


def test_covering_checks(lonely, z2):
    assert check_covering(z2.covering())
    with pytest.raises(NotSurjective):
        check_covering(CoveringMap(z2, ck_expand(lonely), np.array([0])))


def test_covering_rejects_valuation_mismatch(chain3):
    flipped = make({"a": [(0, 1)], "b": [(1, 2)]}, 3, {"p0": [1]})
    with pytest.raises(NotHomomorphism):
        check_covering(CoveringMap(chain3, flipped, np.arange(3)))


def test_covering_rejects_split_class():
    source = s5_from_blocks(("a",), [[0, 0, 1]], [[False, True, False]])
    target = s5_from_blocks(("a",), [[0, 0, 1]], [[False, True, False]])
    assert check_covering(CoveringMap(source, target, np.arange(3)))
    lone = s5_from_blocks(("a",), [[0, 1]], [[False, True]])
    with pytest.raises((NotBisimilar, NotHomomorphism)):
        check_covering(CoveringMap(source, lone, np.array([0, 1, 0])))
    assert not is_covering(CoveringMap(source, lone, np.array([0, 1, 0])))


@pytest.mark.property_based
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 4), k=st.integers(1, 2))
def test_coarsest_bisimulation_matches_naive(seed, n, k):
    rng = np.random.default_rng(seed)
    m = random_s5(rng, n, k)
    other = random_s5(rng, int(rng.integers(1, 5)), k)
    part = coarsest_bisimulation(m, other)
    pairs = naive_bisimulation(m, other)
    for w in range(m.n_worlds):
        for v in range(other.n_worlds):
            assert part.same(w, v) == ((w, v) in pairs)


@pytest.mark.property_based
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), ell=st.integers(0, 2))
def test_bounded_levels_match_game(seed, ell):
    rng = np.random.default_rng(seed)
    m = random_s5(rng, int(rng.integers(1, 4)), 2)
    other = random_s5(rng, int(rng.integers(1, 4)), 2)
    for w in range(m.n_worlds):
        for v in range(other.n_worlds):
            assert l_bisimilar(m, w, other, v, ell) == bounded_bisimilar(m, w, other, v, ell)
