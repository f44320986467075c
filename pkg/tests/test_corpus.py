import numpy as np
import pandas as pd
import pytest

from libs.bisim import check_covering
from libs.corpus import CorpusSpec, build_corpus, corpus_frame, cyclic_negative, gen_corpus, random_s5
from libs.errors import SpecParse
from libs.kripke import ck_expand, is_connected

SMALL = {
    "seed": 7, "worlds": [1, 3], "agents": 2, "props": 1, "count": 4,
    "steps": [{"kind": "cover", "edges": "spanning"}, {"kind": "unfold", "depth": 2}],
}


def test_spec_defaults_and_round_trip():
    spec = CorpusSpec.from_dict({})
    assert spec.worlds == (1, 4) and spec.count == 10
    assert CorpusSpec.from_dict(CorpusSpec.from_dict(SMALL).to_dict()) == CorpusSpec.from_dict(SMALL)


@pytest.mark.parametrize("bad", [
    {"colour": 1},
    {"worlds": [3, 1]},
    {"worlds": "many"},
    {"agents": 9},
    {"density": 1.5},
    {"steps": [{"kind": "shuffle"}]},
    {"steps": [{"kind": "cover", "edges": "sparse"}]},
    [1, 2],
])
def test_spec_rejects(bad):
    with pytest.raises(SpecParse):
        CorpusSpec.from_dict(bad)


def test_load_missing_file(tmp_path):
    with pytest.raises(SpecParse):
        CorpusSpec.load(str(tmp_path / "nope.json"))


def test_singletons():
    entries = build_corpus(CorpusSpec.from_dict({"worlds": [1, 1], "count": 3}))
    assert [e.name for e in entries] == ["s0000-base", "s0001-base", "s0002-base"]
    assert all(e.structure.n_worlds == 1 for e in entries)


def test_same_seed_same_bytes():
    first = [e.dump() for e in build_corpus(CorpusSpec.from_dict(SMALL))]
    second = [e.dump() for e in build_corpus(CorpusSpec.from_dict(SMALL))]
    assert first == second


def test_derived_entries_cover_their_base():
    entries = build_corpus(CorpusSpec.from_dict(SMALL))
    covers = [e for e in entries if e.kind == "cover"]
    assert len(covers) == 4
    for entry in covers:
        assert entry.source.endswith("-base")
        assert check_covering(entry.structure.covering())
    unfolds = [e for e in entries if e.kind == "unfold"]
    assert all(e.covering["truncated"] == 2 for e in unfolds)


def test_random_structures_are_connected():
    rng = np.random.default_rng(0)
    for n in range(1, 8):
        assert is_connected(ck_expand(random_s5(rng, n, 3, density=0.2)))


def test_cyclic_negative_shape():
    m = cyclic_negative(3, 2)
    assert m.n_worlds == 2 and m.n_agents == 3
    assert m.valuation.shape == (2, 2)


def test_gen_corpus_writes_files(tmp_path):
    spec = CorpusSpec.from_dict(SMALL)
    paths = gen_corpus(spec, str(tmp_path))
    frame = pd.read_csv(tmp_path / "corpus.csv")
    assert list(frame.columns) == ["file", "kind", "source", "worlds", "agents", "props"]
    assert len(frame) == len(paths)
    assert (tmp_path / "s0000-base.json").exists()
    assert frame["file"].tolist() == corpus_frame(build_corpus(spec))["file"].tolist()
