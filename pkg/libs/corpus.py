"""
Seeded corpora of S5 structures.

A corpus spec names the random base structures to draw and the pipeline
steps (cover, boost, unfold) applied to each base. Everything is derived
from a single ``numpy.random.default_rng(seed)``, so the same spec always
produces the same files, byte for byte.
"""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from libs import config
from libs.cayley import EDGE_SETS, boost_richness, build_covering, tree_unfold
from libs.errors import CorpusIoError, GroupTooLarge, SpecParse
from libs.kripke import MAX_AGENTS, UnionFind, s5_from_blocks
from libs.structio import dump_structure

__all__ = [
    'AGENT_NAMES', 'STEP_KINDS', 'CorpusSpec', 'CorpusEntry', 'random_s5',
    'cyclic_negative', 'build_corpus', 'gen_corpus', 'corpus_frame',
]

AGENT_NAMES = "abcdefgh"
STEP_KINDS = ("cover", "boost", "unfold")


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    worlds: tuple = (1, 4)
    agents: int = 2
    props: int = 1
    density: float = 0.5
    count: int = 10
    steps: tuple = ()

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise SpecParse("Corpus spec must be a JSON object")
        known = {"seed", "worlds", "agents", "props", "density", "count", "steps"}
        unknown = set(data) - known
        if unknown:
            raise SpecParse(f"Unknown corpus spec keys: {sorted(unknown)}")
        try:
            lo, hi = (int(x) for x in data.get("worlds", (1, 4)))
            spec = cls(
                seed=int(data.get("seed", config.DEFAULT_SEED)),
                worlds=(lo, hi),
                agents=int(data.get("agents", 2)),
                props=int(data.get("props", 1)),
                density=float(data.get("density", 0.5)),
                count=int(data.get("count", 10)),
                steps=tuple(_parse_step(s) for s in data.get("steps", ())),
            )
        except (TypeError, ValueError) as e:
            raise SpecParse(f"Malformed corpus spec: {e}") from e
        spec.check()
        return spec

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise SpecParse(f"Spec file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise SpecParse(f"{path}: {e}") from e
        return cls.from_dict(data)

    def check(self):
        lo, hi = self.worlds
        if not 1 <= lo <= hi:
            raise SpecParse(f"World range must satisfy 1 <= lo <= hi, got [{lo}, {hi}]")
        if not 1 <= self.agents <= MAX_AGENTS:
            raise SpecParse(f"Agent count must be in 1..{MAX_AGENTS}, got {self.agents}")
        if self.props < 0 or self.count < 0:
            raise SpecParse("Proposition and structure counts must be non-negative")
        if not 0.0 <= self.density <= 1.0:
            raise SpecParse(f"Density must lie in [0, 1], got {self.density}")

    def to_dict(self):
        return {
            "seed": self.seed,
            "worlds": list(self.worlds),
            "agents": self.agents,
            "props": self.props,
            "density": self.density,
            "count": self.count,
            "steps": [dict(s) for s in self.steps],
        }


def _parse_step(raw):
    if not isinstance(raw, dict) or raw.get("kind") not in STEP_KINDS:
        raise SpecParse(f"Step must be an object with kind in {STEP_KINDS}: {raw!r}")
    step = dict(raw)
    edges = step.get("edges", "spanning")
    if edges not in EDGE_SETS:
        raise SpecParse(f"Unknown edge set {edges!r}")
    step["edges"] = edges
    step["cap"] = int(step["cap"]) if step.get("cap") is not None else None
    if step["kind"] == "cover":
        step["copies"] = int(step.get("copies", 0))
    elif step["kind"] == "boost":
        step["k"] = int(step.get("k", 2))
    else:
        step["depth"] = int(step.get("depth", 2))
        step["copies"] = int(step.get("copies", 0))
    return tuple(sorted(step.items()))


@dataclass
class CorpusEntry:
    name: str
    kind: str
    source: str
    structure: object
    covering: dict = None
    notes: dict = field(default_factory=dict)

    @property
    def s5(self):
        """The plain S5 structure, for Cayley entries their base."""
        return getattr(self.structure, "base", self.structure)

    def dump(self):
        return dump_structure(self.s5, covering=self.covering)


def random_s5(rng, n_worlds, n_agents, n_props=1, density=0.5, connected=True):
    """
    Random S5 structure.

    Each world joins the class of an earlier world with probability
    ``density`` per agent; with ``connected`` the components left over are
    then glued together through a random agent.
    """
    if n_worlds < 1:
        raise ValueError("Need at least one world")
    blocks = np.zeros((n_agents, n_worlds), dtype=np.int64)
    for a in range(n_agents):
        labels = np.arange(n_worlds)
        for w in range(1, n_worlds):
            if rng.random() < density:
                labels[w] = labels[int(rng.integers(0, w))]
        blocks[a] = labels

    uf = UnionFind(n_worlds)
    for a in range(n_agents):
        for w in range(n_worlds):
            uf.union(w, int(blocks[a, w]))
    comps = uf.labels()
    # components are numbered by first world, so each one can attach to an earlier world
    for c in range(1, int(comps.max()) + 1 if connected else 1):
        w = int(np.flatnonzero(comps == c)[0])
        a = int(rng.integers(0, n_agents))
        v = int(rng.integers(0, w))
        blocks[a][blocks[a] == blocks[a, w]] = blocks[a, v]

    valuation = rng.random((n_props, n_worlds)) < 0.5
    return s5_from_blocks(tuple(AGENT_NAMES[:n_agents]), blocks, valuation)


def cyclic_negative(n_agents=2, n_props=1):
    """Two worlds sharing one class for every agent: the smallest coset 2-cycle."""
    if n_agents < 2:
        raise ValueError("A coset 2-cycle needs two agents")
    blocks = np.zeros((n_agents, 2), dtype=np.int64)
    valuation = np.zeros((n_props, 2), dtype=bool)
    return s5_from_blocks(tuple(AGENT_NAMES[:n_agents]), blocks, valuation)


def _apply_step(base, step):
    step = dict(step)
    if step["kind"] == "cover":
        return build_covering(base, 0, step["edges"], step["copies"], cap=step["cap"])
    if step["kind"] == "boost":
        return boost_richness(base, 0, step["k"], step["edges"], cap=step["cap"])
    return tree_unfold(base, 0, step["depth"], step["edges"], step["copies"], cap=step["cap"])


def _step_tag(step):
    step = dict(step)
    if step["kind"] == "cover":
        return f"cover-{step['edges']}-c{step['copies']}"
    if step["kind"] == "boost":
        return f"boost-{step['edges']}-k{step['k']}"
    return f"unfold-{step['edges']}-d{step['depth']}-c{step['copies']}"


def build_corpus(spec):
    """
    Draw every base structure and run the pipeline steps on it.

    Steps that exceed the group cap are logged and skipped.

    Returns:
        list[CorpusEntry]: In generation order, names unique.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.worlds
    entries = []
    for i in range(spec.count):
        n = int(rng.integers(lo, hi + 1))
        base = random_s5(rng, n, spec.agents, spec.props, spec.density)
        name = f"s{i:04d}-base"
        entries.append(CorpusEntry(name, "base", name, base))
        for j, step in enumerate(spec.steps):
            derived = f"s{i:04d}-{j:02d}-{_step_tag(step)}"
            try:
                c = _apply_step(base, step)
            except GroupTooLarge as e:
                logging.warning(f"{derived}: skipped, {e}")
                continue
            entries.append(CorpusEntry(derived, dict(step)["kind"], name, c, c.covering_dict()))
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise CorpusIoError("Corpus file names collide")
    logging.info(f"Corpus: {spec.count} bases, {len(entries)} structures (seed {spec.seed}).")
    return entries


def corpus_frame(entries):
    return pd.DataFrame({
        "file": [f"{e.name}.json" for e in entries],
        "kind": [e.kind for e in entries],
        "source": [f"{e.source}.json" for e in entries],
        "worlds": [e.structure.n_worlds for e in entries],
        "agents": [len(e.structure.agents) for e in entries],
        "props": [len(e.structure.prop_names) for e in entries],
    })


def gen_corpus(spec, out_dir):
    """
    Write the corpus as structure files plus ``corpus.csv``.

    Raises:
        CorpusIoError: When the directory or a file cannot be written.

    Returns:
        list[str]: Paths written, in generation order.
    """
    entries = build_corpus(spec)
    paths = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        for entry in entries:
            path = os.path.join(out_dir, f"{entry.name}.json")
            with open(path, "w", newline="\n") as f:
                f.write(entry.dump())
            paths.append(path)
        corpus_frame(entries).to_csv(os.path.join(out_dir, "corpus.csv"), index=False, lineterminator="\n")
    except OSError as e:
        raise CorpusIoError(f"Cannot write corpus to {out_dir}: {e}") from e
    logging.info(f"Wrote {len(paths)} structure files to {out_dir}")
    return paths
