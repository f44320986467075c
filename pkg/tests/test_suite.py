import json

import pandas as pd
import pytest

from libs.errors import InsufficientAcyclicity, NoCandidate, SpecParse
from libs.suite import CRITERIA, SuiteSpec, evaluate_suite, junit_xml, run_suite

FAST = {
    "seed": 3,
    "profile": "small",
    "criteria": [1, 4, 5, 12],
    "corpus": {"worlds": [1, 3], "count": 3, "steps": [{"kind": "cover", "edges": "spanning"}]},
}


def test_registry_is_complete():
    assert sorted(CRITERIA) == list(range(1, 13))


def test_spec_parsing():
    spec = SuiteSpec.from_dict(FAST)
    assert spec.criteria == (1, 4, 5, 12)
    assert spec.corpus.seed == 3
    assert spec.knobs[1]["structures"] == 20
    assert spec.knobs[1]["max_agents"] == 3
    custom = SuiteSpec.from_dict({**FAST, "knobs": {"1": {"structures": 2}}})
    assert custom.knobs[1]["structures"] == 2


@pytest.mark.parametrize("bad", [
    {"criteria": [99]},
    {"profile": "huge"},
    {"tempo": 1},
    {"knobs": {"x": {}}},
    {"knobs": {"12": {"criteria": [12]}}},
    {"knobs": {"12": {"criteria": [99]}}},
])
def test_spec_rejects(bad):
    with pytest.raises(SpecParse):
        SuiteSpec.from_dict(bad)


def test_default_spec_selects_every_criterion():
    spec = SuiteSpec.from_dict({})
    assert spec.criteria == tuple(range(1, 13))
    assert spec.knobs[12] == {"criteria": [1, 4, 5]}
    assert SuiteSpec.from_dict({"criteria": [12], "profile": "small"}).knobs[12] == {"criteria": [1, 5]}


def test_empty_corpus_is_vacuous():
    spec = SuiteSpec.from_dict({"criteria": [3, 6], "corpus": {"count": 0}, "profile": "small"})
    report = evaluate_suite(spec, threads=1)
    assert report.corpus_size == 0
    assert report.passed
    assert all(r.vacuous for r in report.results)
    assert junit_xml(report).count('<skipped message="vacuous"') == 2


def test_run_suite_is_byte_stable(tmp_path):
    spec = SuiteSpec.from_dict(FAST)
    assert run_suite(spec, str(tmp_path / "one"), threads=2) == 0
    assert run_suite(spec, str(tmp_path / "two"), threads=1) == 0
    first = (tmp_path / "one" / "report.json").read_bytes()
    assert first == (tmp_path / "two" / "report.json").read_bytes()
    report = json.loads(first)
    assert [c["criterion"] for c in report["criteria"]] == [1, 4, 5, 12]
    assert "settings" in report
    summary = pd.read_csv(tmp_path / "one" / "summary.csv")
    assert summary["passed"].all()
    assert (tmp_path / "one" / "junit.xml").exists()


def test_run_suite_from_path(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"criteria": [4], "profile": "small", "corpus": {"count": 0}}))
    assert run_suite(str(path), str(tmp_path / "out"), junit=False) == 0
    assert not (tmp_path / "out" / "junit.xml").exists()
    with pytest.raises(SpecParse):
        run_suite(str(tmp_path / "missing.json"), str(tmp_path / "out"))


def test_coverage_floors():
    # one single-world base; both boosts are Z2^4 on two agents, so every
    # coset 4-cycle a1 b1 a1 b1 closes and the freeness gate cannot pass
    spec = SuiteSpec.from_dict({
        "seed": 5,
        "profile": "small",
        "criteria": [10, 11],
        "corpus": {"worlds": [1, 1], "count": 1, "steps": [
            {"kind": "boost", "edges": "spanning", "k": 1},
            {"kind": "boost", "edges": "full", "k": 1},
        ]},
    })
    report = evaluate_suite(spec, threads=1)
    assert report.corpus_size == 3
    freeness, upgrade = report.results
    assert freeness.vacuous
    assert freeness.checked == 0
    assert freeness.skipped == 2
    assert freeness.notes["floor"] == {"what": "gated structures", "needed": 1, "met": 0}
    assert all("acyclicity < 5" in g["gates"] for g in freeness.notes["gate_failures"])
    assert upgrade.notes["floor"] == {"what": "gated pairs", "needed": 1, "met": 1}
    assert not upgrade.vacuous
    assert upgrade.checked == 1


def test_unavailable_calls_do_not_count(monkeypatch):
    def no_candidate(*args, **kwargs):
        raise NoCandidate("richness ran out")

    def too_cyclic(*args, **kwargs):
        raise InsufficientAcyclicity("not acyclic enough")

    monkeypatch.setattr("libs.suite.triangle_step", no_candidate)
    monkeypatch.setattr("libs.suite.step_away_check", too_cyclic)
    monkeypatch.setattr("libs.suite.push_away", too_cyclic)
    spec = SuiteSpec.from_dict({
        "seed": 5,
        "profile": "small",
        "criteria": [9],
        "corpus": {"worlds": [1, 1], "count": 1, "steps": [
            {"kind": "unfold", "edges": "spanning", "depth": 2, "copies": 1},
        ]},
    })
    result = evaluate_suite(spec, threads=1).results[0]
    assert result.passed
    assert result.checked == 0
    assert result.notes["calls"] == {"triangle": 0, "step_away": 0, "push_away": 0}
    assert result.notes["unavailable"] == {"triangle": 200, "step_away": 200, "push_away": 200}
    assert result.notes["floor"] == {"what": "completed calls per procedure", "needed": 5, "met": 0}
    assert result.vacuous
