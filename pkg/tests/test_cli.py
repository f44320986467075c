import io
import json

import pytest

import epistemia

CHAIN3 = {"agents": ["a", "b"], "worlds": 3, "edges": {"a": [[0, 1]], "b": [[1, 2]]}, "props": {"p0": [0]}}
TWIN = {"agents": ["a", "b"], "worlds": 2, "edges": {"a": [[0, 1]], "b": [[0, 1]]}, "props": {"p0": []}}
BROKEN = {"agents": ["a"], "worlds": 3, "edges": {"a": [[0, 1], [1, 2]]}, "props": {"p0": []}}
PAIR = {"agents": ["a"], "worlds": 2, "edges": {"a": [[0, 1]]}, "props": {"p0": []}}
RESERVED = {"agents": ["p0"], "worlds": 1, "edges": {}, "props": {}}


@pytest.fixture
def files(tmp_path):
    paths = {}
    named = {"chain3": CHAIN3, "twin": TWIN, "broken": BROKEN, "pair": PAIR, "reserved": RESERVED}
    for name, data in named.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(data))
        paths[name] = str(path)
    return paths


@pytest.fixture
def run(tmp_path, capsys):
    log = str(tmp_path / "cli.log")

    def call(*argv):
        capsys.readouterr()
        code = epistemia.main(["--log-file", log, "--quiet", *argv])
        return code, capsys.readouterr().out
    return call


def test_validate(files, run):
    code, out = run("validate", "--structure", files["chain3"])
    assert code == 0
    assert json.loads(out) == {"ok": True, "worlds": 3, "agents": ["a", "b"], "props": ["p0"]}
    code, out = run("validate", "--structure", files["broken"])
    assert code == 1
    assert json.loads(out)["ok"] is False


def test_rejected_input_exits_2(files, run, tmp_path):
    assert run("expand", "--structure", str(tmp_path / "missing.json"))[0] == 2
    assert run("expand", "--structure", files["broken"])[0] == 2
    assert run("validate", "--structure", files["reserved"])[0] == 2
    assert run("mc", "--structure", files["chain3"], "--formula", "[c]p0")[0] == 2
    assert run("upgrade", "--left", files["twin"], "--right", files["twin"], "--q", "1")[0] == 2


def test_expand(files, run):
    code, out = run("expand", "--structure", files["chain3"])
    assert code == 0
    blocks = json.loads(out)["blocks"]
    assert blocks["{}"] == [0, 1, 2]
    assert blocks["a"] == [0, 0, 1]
    assert blocks["a,b"] == [0, 0, 0]


def test_mc(files, run):
    code, out = run("mc", "--structure", files["chain3"], "--formula", "<a>p0", "--world", "1")
    assert code == 0
    assert json.loads(out)["holds"] is True
    _, out = run("mc", "--structure", files["chain3"], "--formula", "p0")
    assert json.loads(out)["worlds"] == [0]


def test_bisim(files, run):
    code, out = run("bisim", "--left", files["chain3"], "--right", files["chain3"], "--ell", "2")
    assert code == 0
    assert json.loads(out)["bisimilar"] is True
    code, out = run("bisim", "--left", files["chain3"], "--right", files["chain3"], "--ell", "1", "--v", "1")
    assert json.loads(out)["bisimilar"] is False


def test_cover_then_analyze(files, run, tmp_path):
    cover = str(tmp_path / "cover.json")
    assert run("cover", "--structure", files["chain3"], "--check", "--out", cover)[0] == 0
    data = json.loads(open(cover).read())
    assert data["worlds"] == 12
    assert "covering" in data
    code, out = run("analyze", "acyclicity", "--structure", cover, "--cap", "4")
    assert code == 0
    report = json.loads(out)
    assert report["two_acyclic"] is True
    assert report["cycle"] is None


def test_analyze_cyclic(files, run):
    _, out = run("analyze", "acyclicity", "--structure", files["twin"])
    report = json.loads(out)
    assert report["two_acyclic"] is False
    assert report["cycle"] is not None
    code, out = run("analyze", "freeness", "--structure", files["twin"], "--m", "1", "--k", "1")
    assert code == 1
    assert json.loads(out)["notes"] == ["not 2-acyclic"]


def test_witness(files, run):
    code, out = run("witness", "--structure", files["pair"], "--v", "0", "--zs", "0",
                    "--z0", "0", "--gamma", "a", "--m", "2")
    assert code == 0
    report = json.loads(out)
    assert report["witness"] == 1
    assert report["free"] is True


def test_upgrade_and_oracle(files, run, tmp_path):
    report = tmp_path / "upgrade.json"
    code, _ = run("upgrade", "--left", files["chain3"], "--right", files["chain3"], "--q", "1",
                  "--richness", "1", "--no-replay", "--report", str(report))
    assert code == 0
    assert json.loads(report.read_text())["ok"] is True
    code, out = run("ef-oracle", "--left", files["chain3"], "--right", files["chain3"], "--q", "1")
    assert code == 0
    assert json.loads(out)["duplicator_wins"] is True


def test_gen_and_suite(run, tmp_path):
    spec = tmp_path / "corpus.json"
    spec.write_text(json.dumps({"seed": 1, "worlds": [1, 2], "count": 2}))
    assert run("gen", "--spec", str(spec), "--out", str(tmp_path / "corpus"))[0] == 0
    assert sorted(p.name for p in (tmp_path / "corpus").iterdir()) == [
        "corpus.csv", "s0000-base.json", "s0001-base.json"]
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"criteria": [4], "profile": "small", "corpus": {"count": 0}}))
    assert run("suite", "--spec", str(suite), "--out", str(tmp_path / "suite"))[0] == 0
    assert (tmp_path / "suite" / "report.json").exists()


def test_repl(files, run, tmp_path, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("left a 1\nquit\n"))
    transcript = tmp_path / "transcript.json"
    code, _ = run("repl", "--left", files["chain3"], "--right", files["chain3"],
                  "--transcript", str(transcript))
    assert code == 0
    saved = json.loads(transcript.read_text())
    assert saved["outcome"] == "quit"
    assert saved["moves"][0]["duplicator"] == 1
