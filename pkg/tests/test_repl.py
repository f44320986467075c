import json

import pytest

from libs.errors import DanglingWorldId, SignatureMismatch, UnknownAgent
from libs.repl import BisimulationGame, parse_move, repl


def scripted(lines):
    feed = iter(lines)

    def read(prompt):
        try:
            return next(feed)
        except StopIteration:
            raise EOFError
    return read


def test_parse_move():
    agents = ("a", "b")
    assert parse_move("quit", agents) is None
    assert parse_move("left a,b 4", agents) == (0, 0b11, 4)
    assert parse_move("right b 0", agents) == (1, 0b10, 0)
    for bad in ("up a 1", "left a", "left a x"):
        with pytest.raises(ValueError):
            parse_move(bad, agents)
    with pytest.raises(ValueError, match="non-empty"):
        parse_move("left {} 1", agents)
    with pytest.raises(UnknownAgent):
        parse_move("left c 1", agents)


def test_game_rejects_bad_setup(chain3, lonely):
    with pytest.raises(DanglingWorldId):
        BisimulationGame(chain3, 5, chain3, 0, 1)
    with pytest.raises(SignatureMismatch):
        BisimulationGame(chain3, 0, lonely, 0, 1)


def test_atom_mismatch_loses_at_start(chain3):
    game = BisimulationGame(chain3, 0, chain3, 1, 2)
    assert "differ on atoms" in game.start()
    assert game.outcome == "spoiler"


def test_zero_rounds(chain3):
    game = BisimulationGame(chain3, 0, chain3, 0, 0)
    game.start()
    assert game.outcome == "duplicator"


def test_duplicator_survives_on_identical_structures(chain3):
    game = BisimulationGame(chain3, 0, chain3, 0, 2)
    game.start()
    assert game.play(0, 0b01, 1) == 1
    assert game.position == [1, 1]
    assert game.outcome is None
    assert game.play(1, 0b10, 2) == 1
    assert game.outcome == "duplicator"
    with pytest.raises(ValueError):
        game.play(0, 0b01, 0)
    moves = game.transcript()["moves"]
    assert [m["side"] for m in moves] == ["left", "right"]
    assert moves[1]["coalition"] == "b"


def test_spoiler_wins_when_no_answer(chain3, singleton):
    game = BisimulationGame(chain3, 0, singleton, 0, 1)
    game.start()
    assert game.play(0, 0b01, 1) is None
    assert game.outcome == "spoiler"
    assert game.transcript()["moves"][0]["duplicator"] is None


def test_move_outside_class(chain3):
    game = BisimulationGame(chain3, 0, chain3, 0, 1)
    game.start()
    with pytest.raises(ValueError):
        game.play(0, 0b01, 2)
    assert game.round == 0


def test_repl_quit_and_eof(chain3):
    out = []
    transcript = repl(chain3, 0, chain3, 0, 2, read=scripted(["quit"]), write=out.append)
    assert transcript == {"rounds": 2, "moves": [], "outcome": "quit"}
    out = []
    repl(chain3, 0, chain3, 0, 2, read=scripted([]), write=out.append)
    assert out[-1].strip() == "Bye."


def test_repl_plays_and_writes_transcript(chain3, tmp_path):
    out = []
    path = tmp_path / "transcript.json"
    lines = ["", "left a 2", "left c 1", "left a 1", "right b 2"]
    transcript = repl(chain3, 0, chain3, 0, 2, transcript_path=str(path),
                      read=scripted(lines), write=out.append)
    assert transcript["outcome"] == "duplicator"
    assert len(transcript["moves"]) == 2
    assert sum(line.startswith("Invalid move") for line in out) == 2
    assert out[-1] == "All rounds played; Duplicator wins."
    assert json.loads(path.read_text()) == transcript
