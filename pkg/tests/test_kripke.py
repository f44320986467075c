import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from libs.corpus import random_s5
from libs.errors import DanglingWorldId, EmptyStructure, SignatureMismatch, StructureFormatError, UnknownAgent
from libs.kripke import (
    ValidationReport,
    ck_expand,
    comparable,
    coset,
    disjoint_union,
    format_coalition,
    is_connected,
    parse_coalition,
    s5_from_blocks,
    validate_s5,
)
from tests.oracles import reachability_labels, same_partition


def test_validate_accepts_closed_relation(chain3):
    assert chain3.n_worlds == 3
    assert list(chain3.partitions[0]) == [0, 0, 1]
    assert list(chain3.partitions[1]) == [0, 1, 1]
    assert chain3.valuation.tolist() == [[True, False, False]]


def test_validate_reports_missing_transitive_pair():
    result = validate_s5({"a": [(0, 1), (1, 2)]}, 3)
    assert isinstance(result, ValidationReport)
    assert not result.ok
    assert result.missing_pairs == {"a": [(0, 2)]}


def test_validate_strict_requires_loops():
    result = validate_s5({"a": [(0, 1)]}, 2, strict=True)
    assert isinstance(result, ValidationReport)
    assert result.missing_loops == {"a": [0, 1]}
    ok = validate_s5({"a": [(0, 0), (1, 1), (0, 1)]}, 2, strict=True)
    assert ok.loops


def test_validate_rejects_dangling_world():
    with pytest.raises(DanglingWorldId):
        validate_s5({"a": [(0, 3)]}, 2)


@pytest.mark.parametrize("name", ["p0", "p12", "T", "F", "a b", "1a", ""])
def test_validate_rejects_unusable_agent_names(name):
    with pytest.raises(StructureFormatError):
        validate_s5({name: []}, 1)
    with pytest.raises(StructureFormatError):
        s5_from_blocks((name,), np.zeros((1, 1), dtype=np.int64))


def test_validate_accepts_names_near_reserved_ones():
    m = validate_s5({"p": [], "Tom": [], "p0x": [], "_F": []}, 1)
    assert m.agents == ("p", "Tom", "p0x", "_F")


def test_coalition_parsing_round_trip():
    agents = ("a", "b", "c")
    assert parse_coalition("a,c", agents) == 0b101
    assert parse_coalition("", agents) == 0
    assert format_coalition(0b110, agents) == "b,c"
    with pytest.raises(UnknownAgent):
        parse_coalition("a,z", agents)


def test_comparable():
    assert comparable(0b01, 0b11)
    assert comparable(0, 0b10)
    assert not comparable(0b01, 0b10)


def test_ck_expand_chain(chain3):
    ck = ck_expand(chain3)
    assert list(ck.blocks[0]) == [0, 1, 2]
    assert ck.n_classes(0b11) == 1
    assert coset(ck, 0, 0b01) == {0, 1}
    assert coset(ck, 0, 0b11) == {0, 1, 2}
    assert is_connected(ck)


def test_is_connected_empty_raises():
    empty = s5_from_blocks(("a",), np.zeros((1, 0), dtype=np.int64))
    assert empty.n_worlds == 0
    assert empty.valuation.shape == (0, 0)
    with pytest.raises(EmptyStructure):
        is_connected(ck_expand(empty))


def test_disjoint_union_keeps_sides_apart(chain3, singleton):
    union = ck_expand(disjoint_union(chain3, singleton))
    assert union.n_worlds == 4
    assert union.n_classes(0b11) == 2
    assert not union.same_class(0b11, 0, 3)


def test_disjoint_union_signature_mismatch(chain3, lonely):
    with pytest.raises(SignatureMismatch):
        disjoint_union(chain3, lonely)


@pytest.mark.property_based
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 7), k=st.integers(1, 3))
def test_ck_expand_matches_reachability(seed, n, k):
    m = random_s5(np.random.default_rng(seed), n, k, connected=False)
    ck = ck_expand(m)
    for alpha in ck.coalitions:
        members = [a for a in range(k) if alpha >> a & 1]
        assert same_partition(ck.blocks[alpha], reachability_labels(m.partitions, members))


def test_s5_from_blocks_valuation_shapes():
    one_row = s5_from_blocks(("a",), [[0, 0, 1]], [True, False, True])
    assert one_row.valuation.shape == (1, 3)
    assert one_row.prop_names == ("p0",)
    no_props = s5_from_blocks(("a", "b"), np.zeros((2, 0), dtype=np.int64), np.zeros((2, 0), dtype=bool))
    assert no_props.valuation.shape == (2, 0)
    assert no_props.prop_names == ("p0", "p1")
