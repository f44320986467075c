import math

import numpy as np
import pytest

from libs.errors import (
    HypothesisViolated,
    InsufficientAcyclicity,
    MalformedPath,
    Not2Acyclic,
    PostconditionFailed,
    SameWorld,
)
from libs.freeness import (
    _audit_order,
    AvoidSet,
    CosetPath,
    PathFlags,
    brute_force_witness,
    check_mk_free,
    classify_path,
    coset_paths,
    find_free_witness,
    is_m_free,
    push_away,
    rho,
    short_t,
    step_away_check,
    t_distance,
    t_distance_set,
    triangle_step,
)
from libs.kripke import ck_expand


def test_avoid_set(chain3_ck, twin):
    t = rho(chain3_ck, 0, 0b01)
    assert t == AvoidSet(0, 0b01)
    assert t.extent(chain3_ck) == frozenset({(0b01, 0), (0b11, 0)})
    assert t.covered_by(chain3_ck, 0b111)
    assert not t.covered_by(chain3_ck, 0b100)
    with pytest.raises(Not2Acyclic):
        rho(ck_expand(twin), 0, 1)


def test_classify_path(chain3_ck):
    assert classify_path(chain3_ck, [0, 1, 1, 2, 2]) == PathFlags(True, True, True, None)
    assert not classify_path(chain3_ck, [0, 2, 2]).valid
    assert classify_path(chain3_ck, [0, 3, 2], t=AvoidSet(0, 0b01)).non_t is False
    with pytest.raises(MalformedPath):
        classify_path(chain3_ck, [0, 1])
    with pytest.raises(MalformedPath):
        classify_path(chain3_ck, [0, 9, 1])


def test_classify_path_accepts_numpy_integers(chain3_ck):
    path = list(np.array([0, 1, 1, 2, 2], dtype=np.int64))
    assert classify_path(chain3_ck, path) == PathFlags(True, True, True, None)
    worlds = np.flatnonzero(chain3_ck.blocks[0b01] == 0)
    assert classify_path(chain3_ck, [worlds[0], np.int32(1), worlds[1]]).valid
    with pytest.raises(MalformedPath):
        classify_path(chain3_ck, [0, 1.0, 1])


def test_coset_paths_on_chain(chain3_ck):
    paths = list(coset_paths(chain3_ck, 0, 2, 3))
    assert paths == [CosetPath((0, 1, 2), (0b01, 0b10)), CosetPath((0, 2), (0b11,))]
    assert list(coset_paths(chain3_ck, 0, 2, 3, inner=True)) == [paths[0]]
    assert paths[0].to_list() == [0, 1, 1, 2, 2]


def test_t_distance(chain3_ck):
    assert t_distance(chain3_ck, 0, 2, None) == 1
    d, path = t_distance(chain3_ck, 0, 2, None, path=True)
    assert (d, path) == (1, CosetPath((0, 2), (0b11,)))
    assert t_distance(chain3_ck, 1, 0, AvoidSet(0, 0b01)) == math.inf
    assert t_distance_set(chain3_ck, [2], 2, None) == math.inf
    with pytest.raises(SameWorld):
        t_distance(chain3_ck, 1, 1, None)


def test_short_t(chain3_ck):
    report = short_t(chain3_ck, 0, 2, None, 3)
    assert report.coalition == 0b01
    assert report.first_labels == (0b01, 0b11)
    assert report.realized


def test_step_away_preconditions(chain3_ck):
    with pytest.raises(InsufficientAcyclicity):
        step_away_check(chain3_ck, 0, 1, 0b01, 1, acyclicity=1)
    with pytest.raises(HypothesisViolated):
        step_away_check(chain3_ck, 0, 1, 0b01, 1)


def test_triangle_step_already_closed(chain3_ck):
    assert triangle_step(chain3_ck, 0, 2, [1], 1) == 0
    with pytest.raises(HypothesisViolated):
        triangle_step(chain3_ck, 1, 2, [0, 2], 0)


def test_push_away_needs_distinct_target(chain3_ck):
    with pytest.raises(HypothesisViolated):
        push_away(chain3_ck, 0, 0, [], 0, 1)


def test_push_order_audit(chain3_ck):
    # the only inner path 0 -a- 1 -b- 2 meets 1 in its first class and 2 in its second
    assert len(list(coset_paths(chain3_ck, 0, 2, 3, inner=True))) == 1
    _audit_order(chain3_ck, 0, [1, 2], None, 3)
    _audit_order(chain3_ck, 0, [0, 1, 2], None, 3)
    with pytest.raises(PostconditionFailed):
        _audit_order(chain3_ck, 0, [2, 1, 2], None, 3)


def test_is_m_free(chain3_ck):
    assert not is_m_free(chain3_ck, [0], 0, 2, 1)
    assert is_m_free(chain3_ck, [0], 0, 2, 0)
    assert is_m_free(chain3_ck, [1], 1, 0, 1)


def test_free_witness_in_z2(z2):
    assert find_free_witness(z2, 0, [0], 0, 0b1, 2) == 1
    assert brute_force_witness(z2, 0, [0], 0, 0b1, 2) == 1
    assert find_free_witness(z2, 0, [0], 0, 0, 2) == 0
    with pytest.raises(HypothesisViolated):
        find_free_witness(z2, 0, [1], 0, 0b1, 2)
    with pytest.raises(HypothesisViolated):
        find_free_witness(z2, 1, [0], 0, 0, 2)


def test_check_mk_free(z2, twin):
    report = check_mk_free(z2, 2, 1, threads=1)
    assert report.ok
    assert report.checked == 2 and report.fallbacks == 0
    assert check_mk_free(z2, 0, 3).notes == ["vacuous"]
    negative = check_mk_free(ck_expand(twin), 1, 1)
    assert not negative.ok
    assert negative.notes == ["not 2-acyclic"]


def test_check_mk_free_report_shape(chain3_ck):
    report = check_mk_free(chain3_ck, 1, 1, threads=2)
    assert report.checked > 0
    assert report.ok == (report.counterexample is None)
    if report.counterexample is not None:
        assert set(report.counterexample) == {"v", "zs", "z0", "gamma"}
