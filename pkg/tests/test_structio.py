import json

import pytest

from libs.errors import NotEquivalence, StructureFormatError
from libs.kripke import ValidationReport
from libs.structio import (
    dump_structure,
    ensure_structure,
    load_structure,
    read_json,
    structure_from_dict,
    structure_to_dict,
)


def test_canonical_form(chain3):
    data = structure_to_dict(chain3)
    assert data == {
        "agents": ["a", "b"],
        "worlds": 3,
        "edges": {"a": [[0, 1]], "b": [[1, 2]]},
        "props": {"p0": [0]},
    }


def test_dump_is_stable_and_loadable(chain3, tmp_path):
    path = tmp_path / "chain.json"
    text = dump_structure(chain3, str(path))
    assert path.read_text() == text
    again = load_structure(str(path))
    assert dump_structure(again) == text


def test_covering_block_survives(z2):
    data = json.loads(dump_structure(z2.base, covering=z2.covering_dict()))
    _, covering = structure_from_dict(data)
    assert covering["map"] == [0, 0]
    assert covering["edges"] == "full"


def test_props_sorted_numerically():
    data = {"agents": ["a"], "worlds": 1, "edges": {}, "props": {"p10": [], "p2": [0]}}
    result, _ = structure_from_dict(data)
    assert result.prop_names == ("p2", "p10")


def test_malformed_structure():
    with pytest.raises(StructureFormatError):
        structure_from_dict({"agents": ["a"]})
    with pytest.raises(StructureFormatError):
        structure_from_dict({"agents": ["a"], "worlds": 2, "edges": {"b": [[0, 1]]}})


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(StructureFormatError):
        read_json(str(path))


def test_invalid_relation_raises_on_load(tmp_path):
    path = tmp_path / "open.json"
    path.write_text(json.dumps({"agents": ["a"], "worlds": 3, "edges": {"a": [[0, 1], [1, 2]]}}))
    with pytest.raises(NotEquivalence):
        load_structure(str(path))
    result, _ = structure_from_dict(json.loads(path.read_text()))
    assert isinstance(result, ValidationReport)
    with pytest.raises(NotEquivalence):
        ensure_structure(result)
