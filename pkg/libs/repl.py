"""
Plain-text bisimulation game: a human plays Spoiler, the engine plays
Duplicator using the bounded bisimulation levels of the disjoint union.
"""

import logging

from libs.bisim import lbisim_classes
from libs.errors import DanglingWorldId, EpistemiaError
from libs.kripke import check_signature, ck_expand, format_coalition, parse_coalition
from libs.structio import write_json

__all__ = ['BisimulationGame', 'parse_move', 'repl']

SIDES = ("left", "right")


def parse_move(line, agents):
    """
    ``left <coalition> <world>``, ``right <coalition> <world>`` or ``quit``.

    Returns:
        tuple | None: (side index, coalition mask, world), None for quit.

    Raises:
        ValueError: For anything else.
    """
    parts = line.split()
    if parts == ["quit"]:
        return None
    if len(parts) != 3 or parts[0] not in SIDES:
        raise ValueError("Expected: left|right <coalition> <world>, or quit")
    alpha = 0 if parts[1] == "{}" else parse_coalition(parts[1], agents)
    if alpha == 0:
        raise ValueError("Spoiler must move along a non-empty coalition")
    if not parts[2].isdigit():
        raise ValueError(f"World must be a number, got {parts[2]!r}")
    return SIDES.index(parts[0]), alpha, int(parts[2])


class BisimulationGame:
    """
    The ell-round game on (left, w), (right, v).

    Duplicator answers a move to x with the lowest world of the matching
    class on the other side that agrees with x on the remaining rounds.
    """

    def __init__(self, left, w, right, v, rounds, mode="ck"):
        self.cks = [left if hasattr(left, "blocks") else ck_expand(left),
                    right if hasattr(right, "blocks") else ck_expand(right)]
        check_signature(self.cks[0].base, self.cks[1].base)
        for ck, x in zip(self.cks, (w, v)):
            if not 0 <= x < ck.n_worlds:
                raise DanglingWorldId(x, ck.n_worlds)
        self.rounds = rounds
        self.levels, self.shift = lbisim_classes(self.cks[0], self.cks[1], rounds, mode)
        self.position = [int(w), int(v)]
        self.round = 0
        self.moves = []
        self.outcome = None

    @property
    def agents(self):
        return self.cks[0].agents

    def _type(self, side, x, level):
        return self.levels[level][x + (self.shift if side else 0)]

    def start(self):
        """Check the atomic condition at the initial position."""
        w, v = self.position
        if self.cks[0].atom_codes[w] != self.cks[1].atom_codes[v]:
            self.outcome = "spoiler"
            return "Duplicator loses: the starting worlds differ on atoms."
        if self.rounds == 0:
            self.outcome = "duplicator"
            return "No rounds to play; Duplicator wins."
        return f"Game of {self.rounds} rounds from left {w}, right {v}."

    def play(self, side, alpha, x):
        """
        One Spoiler move and the engine's answer.

        Returns:
            int | None: Duplicator's world, None when Duplicator has no answer.

        Raises:
            ValueError: If x is not in the alpha-class of the current world.
        """
        if self.outcome is not None:
            raise ValueError("The game is over")
        ck, other = self.cks[side], self.cks[1 - side]
        here, there = self.position[side], self.position[1 - side]
        if not 0 <= x < ck.n_worlds or not ck.same_class(alpha, here, x):
            raise ValueError(f"World {x} is not in the {format_coalition(alpha, self.agents)}-class of {here}")
        remaining = self.rounds - self.round - 1
        want = self._type(side, x, remaining)
        answer = next((y for y in other.members(alpha, other.block(alpha, there))
                       if self._type(1 - side, y, remaining) == want), None)
        self.round += 1
        self.moves.append({
            "round": self.round,
            "side": SIDES[side],
            "coalition": format_coalition(alpha, self.agents),
            "spoiler": x,
            "duplicator": answer,
        })
        if answer is None:
            self.outcome = "spoiler"
            return None
        self.position[side], self.position[1 - side] = x, answer
        if self.round == self.rounds:
            self.outcome = "duplicator"
        return answer

    def transcript(self):
        return {
            "rounds": self.rounds,
            "moves": list(self.moves),
            "outcome": self.outcome or "quit",
        }


def repl(left, w, right, v, rounds, transcript_path=None, read=input, write=print):
    """
    Interactive game loop; ``read`` and ``write`` stand in for the terminal.

    Returns:
        dict: The transcript, also written to ``transcript_path`` when given.
    """
    game = BisimulationGame(left, w, right, v, rounds)
    write(game.start())
    if game.outcome is None:
        write(f"Agents: {','.join(game.agents)}. Moves: left|right <coalition> <world>, or quit.")
    while game.outcome is None:
        try:
            line = read(f"[round {game.round + 1}/{rounds}] > ").strip()
        except (KeyboardInterrupt, EOFError):
            write("\nBye.")
            break
        if not line:
            continue
        try:
            move = parse_move(line, game.agents)
            if move is None:
                break
            answer = game.play(*move)
        except (ValueError, EpistemiaError) as e:
            write(f"Invalid move: {e}")
            continue
        if answer is None:
            write("Duplicator has no answer and loses.")
        else:
            write(f"Duplicator answers {answer} on the {SIDES[1 - move[0]]} side; "
                  f"position is left {game.position[0]}, right {game.position[1]}.")
            if game.outcome == "duplicator":
                write("All rounds played; Duplicator wins.")
    transcript = game.transcript()
    logging.info(f"REPL finished after {len(transcript['moves'])} moves: {transcript['outcome']}")
    if transcript_path is not None:
        write_json(transcript, transcript_path)
    return transcript
