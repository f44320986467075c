"""
Acceptance suite: twelve empirical criteria run over a seeded corpus.

Each criterion is a cell with its own random generator (seeded from the
suite seed and the criterion number) and its own copies of the corpus
structures, so cells can run on a thread pool and still give the same
report on every run. Reports carry no timings.
"""

import json
import logging
import math
import os
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import pandas as pd

from libs import config
from libs.acyclicity import (
    acyclicity_level,
    agt_table,
    check_2acyclic_char,
    find_coset_cycle,
    is_n_acyclic,
)
from libs.bisim import bisimulation_classes, check_covering, coarsest_bisimulation, refinement_levels
from libs.cayley import EDGE_SETS, CayleyStructure, build_covering, richness_level
from libs.corpus import AGENT_NAMES, CorpusSpec, build_corpus, cyclic_negative, random_s5
from libs.efgame import upgrade_experiment
from libs.errors import (
    CoveringError,
    EpistemiaError,
    GameError,
    GatesFailed,
    GroupTooLarge,
    HypothesisViolated,
    InsufficientAcyclicity,
    NoCandidate,
    PostconditionFailed,
    PreconditionClosed,
    PreconditionDistance,
    SpecParse,
)
from libs.formula import FormulaTable, characteristic_formula, satisfaction
from libs.freeness import (
    AvoidSet,
    check_mk_free,
    coset_paths,
    push_away,
    step_away_check,
    t_distance,
    t_distance_set,
    triangle_step,
)
from libs.hypergraph import attach_region, cl_m, dual, gaifman_distance, is_n_acyclic_hg, neighbourhood
from libs.kripke import CKStructure, agents_of, canonical_blocks, ck_expand, disjoint_union, s5_from_blocks
from libs.structio import write_json

__all__ = [
    'CRITERIA', 'KNOBS', 'SMALL_KNOBS', 'DEFAULT_CORPUS', 'SuiteSpec', 'CriterionResult',
    'SuiteReport', 'evaluate_suite', 'run_suite', 'junit_xml', 'summary_frame',
]

# ---- Size knobs ----
KNOBS = {
    1: {"structures": 200, "max_worlds": 8, "max_agents": 3},
    2: {"max_worlds": 3, "agents": 2, "props": 1, "max_ell": 3},
    3: {"bases": 30, "cap": 20_000},
    4: {"pairs": 100, "max_worlds": 6, "max_agents": 3},
    5: {"max_worlds": 400},
    6: {"levels": [3, 4], "max_worlds": 200},
    7: {"samples": 50, "radii": [2, 3], "max_worlds": 200},
    8: {"max_len": 4, "instances": 100, "max_worlds": 120},
    9: {"calls": 100, "m": 2, "max_worlds": 200},
    10: {"structures": 5, "cells": [[2, 2], [3, 2]], "max_worlds": 40},
    11: {"pairs": 10, "qs": [1, 2], "max_worlds": 64},
    12: {"criteria": [1, 4, 5]},
}

SMALL_KNOBS = {
    1: {"structures": 20, "max_worlds": 5},
    2: {"max_worlds": 2, "max_ell": 2},
    3: {"bases": 4, "cap": 2000},
    4: {"pairs": 10, "max_worlds": 4},
    5: {"max_worlds": 60},
    6: {"levels": [3], "max_worlds": 40},
    7: {"samples": 5, "radii": [2], "max_worlds": 40},
    8: {"max_len": 2, "instances": 10, "max_worlds": 40},
    9: {"calls": 5, "max_worlds": 40},
    10: {"structures": 1, "cells": [[2, 2]], "max_worlds": 16},
    11: {"pairs": 1, "qs": [1], "max_worlds": 16},
    12: {"criteria": [1, 5]},
}

DEFAULT_CORPUS = {
    "worlds": [1, 4],
    "agents": 2,
    "props": 1,
    "density": 0.5,
    "count": 30,
    "steps": [
        {"kind": "cover", "edges": "spanning"},
        {"kind": "cover", "edges": "full", "cap": 20_000},
        {"kind": "boost", "edges": "spanning", "k": 2, "cap": 20_000},
        {"kind": "boost", "edges": "spanning", "k": 1, "cap": 256},
        {"kind": "unfold", "edges": "spanning", "depth": 2, "copies": 1},
    ],
}

CRITERIA = {}


def criterion(number, name):
    def register(func):
        CRITERIA[number] = (name, func)
        return func
    return register


@dataclass(frozen=True)
class SuiteSpec:
    seed: int
    corpus: CorpusSpec
    criteria: tuple
    knobs: dict
    profile: str = "full"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise SpecParse("Suite spec must be a JSON object")
        unknown = set(data) - {"seed", "corpus", "criteria", "knobs", "profile"}
        if unknown:
            raise SpecParse(f"Unknown suite spec keys: {sorted(unknown)}")
        profile = data.get("profile", "full")
        if profile not in ("full", "small"):
            raise SpecParse(f"Unknown profile {profile!r}")
        try:
            seed = int(data.get("seed", config.DEFAULT_SEED))
            corpus = dict(DEFAULT_CORPUS)
            corpus.update(data.get("corpus", {}))
            corpus.setdefault("seed", seed)
            criteria = tuple(sorted({int(c) for c in data.get("criteria", CRITERIA)}))
            overrides = {int(k): dict(v) for k, v in data.get("knobs", {}).items()}
        except (TypeError, ValueError, AttributeError) as e:
            raise SpecParse(f"Malformed suite spec: {e}") from e
        missing = [c for c in criteria if c not in CRITERIA]
        if missing:
            raise SpecParse(f"Unknown criteria: {missing}")
        knobs = {}
        for number in CRITERIA:
            knobs[number] = dict(KNOBS[number])
            if profile == "small":
                knobs[number].update(SMALL_KNOBS[number])
            knobs[number].update(overrides.get(number, {}))
        rerun = knobs[12].get("criteria", [])
        if not isinstance(rerun, list) or any(c not in CRITERIA or c == 12 for c in rerun):
            raise SpecParse(f"Determinism re-runs need known criteria other than 12: {rerun!r}")
        return cls(seed, CorpusSpec.from_dict(corpus), criteria, knobs, profile)

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

    def to_dict(self):
        return {
            "seed": self.seed,
            "profile": self.profile,
            "corpus": self.corpus.to_dict(),
            "criteria": list(self.criteria),
            "knobs": {str(k): self.knobs[k] for k in sorted(self.knobs)},
        }


@dataclass
class CriterionResult:
    number: int
    name: str
    checked: int = 0
    skipped: int = 0
    vacuous: bool = False
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    error: str = None

    @property
    def passed(self):
        return not self.failures and self.error is None

    def fail(self, **witness):
        self.failures.append(witness)

    def to_dict(self):
        return {
            "criterion": self.number,
            "name": self.name,
            "passed": self.passed,
            "vacuous": self.vacuous,
            "checked": self.checked,
            "skipped": self.skipped,
            "failures": self.failures[:10],
            "failure_count": len(self.failures),
            "notes": self.notes,
            "error": self.error,
        }


@dataclass
class SuiteReport:
    spec: SuiteSpec
    corpus_size: int
    results: list

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def exit_code(self):
        return 0 if self.passed else 1

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "settings": config.describe(),
            "corpus_size": self.corpus_size,
            "criteria": [r.to_dict() for r in self.results],
            "passed": self.passed,
        }

    def to_json(self):
        return write_json(self.to_dict())


# ---- Cells ----

class _Cell:
    """Inputs owned by one criterion: knobs, generator and fresh structure copies."""

    def __init__(self, number, spec, entries):
        self.number = number
        self.knobs = spec.knobs[number]
        self.rng = np.random.default_rng([spec.seed, number])
        self.entries = entries
        self._cks = None

    def items(self, max_worlds=None):
        """(entry, ck) pairs with private memo tables, smallest first within each base."""
        if self._cks is None:
            self._cks = [_fresh(e.structure) for e in self.entries]
        for entry, ck in zip(self.entries, self._cks):
            if max_worlds is None or ck.n_worlds <= max_worlds:
                yield entry, ck


def _fresh(structure):
    if isinstance(structure, CayleyStructure):
        c = structure
        return CayleyStructure(c.base, c.blocks, c.elements, c.generators, c.step, c.source,
                               c.base_world, c.world_map, c.edge_set, c.k_copies, c.truncated)
    if isinstance(structure, CKStructure):
        return CKStructure(structure.base, structure.blocks)
    return ck_expand(structure)


def _vacuous(result, what):
    result.vacuous = True
    logging.warning(f"Criterion {result.number} ({result.name}): no {what}, passing vacuously.")


def _floor(result, what, got, need):
    """Record a coverage floor; falling short of it marks the criterion vacuous."""
    result.notes["floor"] = {"what": what, "needed": need, "met": got}
    if got < need:
        result.vacuous = True
        logging.warning(f"Criterion {result.number} ({result.name}): {got} of {need} {what}, passing vacuously.")


def _shortfall(ck, need):
    """Verified acyclicity when it falls below need, else None."""
    if getattr(ck, "truncated", None) is not None:
        return None
    level = acyclicity_level(ck, need)
    return level if level < need else None


def _gated(ck, need):
    return getattr(ck, "truncated", None) is not None or acyclicity_level(ck, need) >= need


def _component_pairs(ck, rng, size):
    """Random tuple of distinct worlds from one connected component, or None."""
    top = ck.blocks[ck.full]
    w = int(rng.integers(0, ck.n_worlds))
    pool = np.flatnonzero(top == top[w])
    if len(pool) < size:
        return None
    return [int(x) for x in rng.choice(pool, size=size, replace=False)]


# ---- Criteria ----

def _reachability_blocks(m, alpha):
    """Floyd-Warshall closure of the agent relations in alpha."""
    n = m.n_worlds
    reach = np.eye(n, dtype=bool)
    for a in agents_of(alpha):
        row = m.partitions[a]
        reach |= row[:, None] == row[None, :]
    for k in range(n):
        reach |= reach[:, k:k + 1] & reach[k:k + 1, :]
    return canonical_blocks(np.argmax(reach, axis=1))


@criterion(1, "ck-expansion-oracle")
def _ck_expansion(cell, result):
    k = cell.knobs
    for _ in range(k["structures"]):
        n = int(cell.rng.integers(1, k["max_worlds"] + 1))
        agents = int(cell.rng.integers(1, k["max_agents"] + 1))
        m = random_s5(cell.rng, n, agents, 1, float(cell.rng.random()), connected=bool(cell.rng.random() < 0.5))
        ck = ck_expand(m)
        for alpha in ck.coalitions:
            result.checked += 1
            if not np.array_equal(canonical_blocks(ck.blocks[alpha]), _reachability_blocks(m, alpha)):
                result.fail(worlds=n, agents=agents, alpha=alpha)


def _set_partitions(n):
    def grow(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(top + 2):
            yield from grow(prefix + [b], max(top, b))
    yield from grow([0], 0)


def _all_structures(max_worlds, agents, props):
    names = tuple(AGENT_NAMES[:agents])
    for n in range(1, max_worlds + 1):
        parts = list(_set_partitions(n))
        for blocks in product(parts, repeat=agents):
            for bits in range(1 << (props * n)):
                valuation = [[bool(bits >> (i * n + w) & 1) for w in range(n)] for i in range(props)]
                yield s5_from_blocks(names, np.array(blocks), np.array(valuation, dtype=bool).reshape(props, n))


@criterion(2, "characteristic-formulas")
def _characteristic(cell, result):
    k = cell.knobs
    structures = list(_all_structures(k["max_worlds"], k["agents"], k["props"]))
    union = structures[0]
    for m in structures[1:]:
        union = disjoint_union(union, m)
    big = ck_expand(union)
    levels = refinement_levels(big, k["max_ell"])
    offset = 0
    for m in structures:
        ck = ck_expand(m)
        own = refinement_levels(ck, k["max_ell"])
        table = FormulaTable()
        for ell in range(k["max_ell"] + 1):
            seen = set()
            for w in range(ck.n_worlds):
                if int(own[ell][w]) in seen:
                    continue
                seen.add(int(own[ell][w]))
                truth = satisfaction(big, characteristic_formula(ck, w, ell, table))
                expect = levels[ell] == levels[ell][offset + w]
                result.checked += big.n_worlds
                if not np.array_equal(truth, expect):
                    bad = int(np.flatnonzero(truth != expect)[0])
                    result.fail(point=offset + w, ell=ell, other=bad)
        offset += ck.n_worlds
    result.notes["points"] = big.n_worlds


@criterion(3, "bisimilar-coverings")
def _coverings(cell, result):
    k = cell.knobs
    bases = [e for e in cell.entries if e.kind == "base"][:k["bases"]]
    derived = [e for e in cell.entries if e.kind in ("cover", "boost")]
    if not bases and not derived:
        _vacuous(result, "structures")
        return

    def verify(c, label):
        result.checked += 1
        try:
            check_covering(c.covering())
        except CoveringError as e:
            result.fail(structure=label, error=type(e).__name__, witness=str(e.witness))

    for entry in bases:
        for edges in EDGE_SETS:
            try:
                c = build_covering(entry.structure, 0, edges, cap=k["cap"])
            except GroupTooLarge:
                result.skipped += 1
                continue
            verify(c, f"{entry.name}:{edges}")
    for entry in derived:
        verify(_fresh(entry.structure), entry.name)


@criterion(4, "ck-safety")
def _ck_safety(cell, result):
    k = cell.knobs
    for _ in range(k["pairs"]):
        agents = int(cell.rng.integers(1, k["max_agents"] + 1))
        density = float(cell.rng.random())
        m = random_s5(cell.rng, int(cell.rng.integers(1, k["max_worlds"] + 1)), agents, 1, density)
        n = random_s5(cell.rng, int(cell.rng.integers(1, k["max_worlds"] + 1)), agents, 1, density)
        s5 = coarsest_bisimulation(m, n, mode="s5")
        ck = coarsest_bisimulation(m, n, mode="ck")
        result.checked += 1
        left = canonical_blocks(np.concatenate([s5.left_blocks, s5.right_blocks]))
        right = canonical_blocks(np.concatenate([ck.left_blocks, ck.right_blocks]))
        if not np.array_equal(left, right):
            result.fail(left_worlds=m.n_worlds, right_worlds=n.n_worlds, agents=agents)


@criterion(5, "two-acyclicity-characterisation")
def _two_acyclic(cell, result):
    items = [(e.name, ck) for e, ck in cell.items(cell.knobs["max_worlds"])]
    agents = cell.entries[0].structure.n_agents if cell.entries else 2
    if agents >= 2:
        items.append(("negative", ck_expand(cyclic_negative(agents))))
    negatives = 0
    for name, ck in items:
        result.checked += 1
        char = check_2acyclic_char(ck)
        negatives += not char
        if char != (find_coset_cycle(ck, 2) is None):
            result.fail(structure=name, characterisation=char)
    result.notes["negatives"] = negatives


@criterion(6, "dual-acyclicity-transfer")
def _transfer(cell, result):
    items = list(cell.items(cell.knobs["max_worlds"]))
    if not items:
        _vacuous(result, "structures")
        return
    for entry, ck in items:
        for n in cell.knobs["levels"]:
            if not is_n_acyclic(ck, n):
                result.skipped += 1
                continue
            result.checked += 1
            if not is_n_acyclic_hg(dual(ck), n):
                result.fail(structure=entry.name, n=n)


@criterion(7, "closure-attachment")
def _attachment(cell, result):
    k = cell.knobs
    pool = [(e, ck) for e, ck in cell.items(k["max_worlds"]) if check_2acyclic_char(ck)]
    shortfalls = []
    for _ in range(4 * k["samples"]):
        if result.checked >= k["samples"] or not pool:
            break
        entry, ck = pool[int(cell.rng.integers(0, len(pool)))]
        m = int(cell.rng.choice(k["radii"]))
        if not _gated(ck, 2 * m + 1):
            result.skipped += 1
            continue
        h = dual(ck)
        vertices = sorted(h.vertices)
        Q = cl_m(h, {vertices[int(cell.rng.integers(0, len(vertices)))]}, 2 * m + 1)
        near = sorted(neighbourhood(h, Q, m) - Q)
        if not near:
            result.skipped += 1
            continue
        a = near[int(cell.rng.integers(0, len(near)))]
        try:
            outcome = attach_region(h, Q, a, m)
        except (PreconditionClosed, PreconditionDistance):
            result.skipped += 1
            continue
        result.checked += 1
        bad = sorted(name for name, ok in outcome.checks.items() if ok is not True)
        if bad:
            level = _shortfall(ck, 4 * m + 3)
            if level is not None:
                logging.warning(f"{entry.name}: attachment law {bad} failed with acyclicity {level} < {4 * m + 3}")
                shortfalls.append(entry.name)
            else:
                result.fail(structure=entry.name, m=m, vertex=a, checks=bad)
    if not pool:
        _vacuous(result, "2-acyclic structures")
    result.notes["shortfalls"] = shortfalls


@criterion(8, "t-distance-bounds")
def _t_distance(cell, result):
    k = cell.knobs
    top = k["max_len"]
    pool = [(e, ck) for e, ck in cell.items(k["max_worlds"])
            if ck.n_worlds > 1 and check_2acyclic_char(ck) and _gated(ck, 2 * top + 1)]
    if not pool:
        _vacuous(result, "gated structures")
        return
    shortfalls = []
    for _ in range(k["instances"]):
        entry, ck = pool[int(cell.rng.integers(0, len(pool)))]
        pair = _component_pairs(ck, cell.rng, 2)
        if pair is None:
            result.skipped += 1
            continue
        w, v = pair
        connecting = int(agt_table(ck)[w, v])
        gamma = connecting & int(cell.rng.integers(0, ck.full + 1))
        t = AvoidSet(v, gamma)
        h = dual(ck)
        avoid = t.dual_vertices(h)
        for ell in range(1, top + 1):
            if next(coset_paths(ck, w, v, ell, t=t, inner=True), None) is not None:
                break
            result.checked += 1
            d = t_distance(ck, w, v, t, cap=ell)
            g = gaifman_distance(h, h.hyperedge(w), h.hyperedge(v), avoid)
            if d > ell and g > ell - 1:
                continue
            level = _shortfall(ck, 2 * top + 3)
            if level is not None:
                logging.warning(f"{entry.name}: t-distance bound failed with acyclicity {level}")
                shortfalls.append(entry.name)
            else:
                result.fail(structure=entry.name, w=w, v=v, gamma=gamma, ell=ell,
                            t_distance=None if math.isinf(d) else d,
                            gaifman=None if math.isinf(g) else g)
    result.notes["shortfalls"] = shortfalls


def _same_type(ck, x, y):
    labels = bisimulation_classes(ck)
    return labels[x] == labels[y]


@criterion(9, "witness-procedures")
def _procedures(cell, result):
    k = cell.knobs
    m = k["m"]
    pool = [(e, ck) for e, ck in cell.items(k["max_worlds"])
            if ck.n_worlds > 3 and check_2acyclic_char(ck) and _gated(ck, 2 * m + 1)]
    if not pool:
        _vacuous(result, "gated structures")
        return
    calls = {"triangle": 0, "step_away": 0, "push_away": 0}
    unavailable = {"triangle": 0, "step_away": 0, "push_away": 0}

    def pick():
        entry, ck = pool[int(cell.rng.integers(0, len(pool)))]
        return entry, ck, _component_pairs(ck, cell.rng, 4)

    for _ in range(40 * k["calls"]):
        if min(calls.values()) >= k["calls"]:
            break
        entry, ck, worlds = pick()
        if worlds is None:
            continue
        table = agt_table(ck)
        v, u, z0, z = worlds

        if calls["triangle"] < k["calls"]:
            zs = [z0, z]
            try:
                out = triangle_step(ck, v, u, zs, z0)
            except HypothesisViolated:
                out = None
            except (NoCandidate, InsufficientAcyclicity):
                unavailable["triangle"] += 1
                out = None
            except PostconditionFailed as e:
                calls["triangle"] += 1
                result.fail(procedure="triangle", structure=entry.name, error=str(e))
                out = None
            if out is not None:
                calls["triangle"] += 1
                keeps = all(table[out, x] == table[v, x] for x in zs)
                closes = table[out, u] == table[out, z0] | table[z0, u]
                if not (keeps and closes and _same_type(ck, out, v)):
                    result.fail(procedure="triangle", structure=entry.name, v=v, u=u, result=int(out))

        if calls["step_away"] < k["calls"]:
            gamma = int(table[v, z]) & int(cell.rng.integers(0, ck.full + 1))
            try:
                report = step_away_check(ck, v, z, gamma, m, acyclicity=2 * m + 1)
            except HypothesisViolated:
                report = None
            except InsufficientAcyclicity:
                unavailable["step_away"] += 1
                report = None
            if report is not None:
                calls["step_away"] += 1
                for violation in report.violations:
                    result.fail(procedure="step_away", structure=entry.name, **violation)

        if calls["push_away"] < k["calls"]:
            transcript = []
            try:
                out = push_away(ck, u, v, [z0], z0, m, transcript)
            except HypothesisViolated:
                out = None
            except (NoCandidate, InsufficientAcyclicity):
                unavailable["push_away"] += 1
                out = None
            except PostconditionFailed as e:
                calls["push_away"] += 1
                result.fail(procedure="push_away", structure=entry.name, error=str(e))
                out = None
            if out is not None:
                calls["push_away"] += 1
                gamma = int(table[z0, v])
                t = AvoidSet(v, gamma)
                far = t_distance_set(ck, [z0], out, t, m + 1) > m
                far_w = out != u and t_distance(ck, u, out, t, m + 1) > m
                kept = table[out, u] == table[v, u] and table[out, z0] == table[v, z0]
                shrinking = all(
                    step.beta is None or (step.beta >> step.agent) & 1 for step in transcript)
                if not (far and far_w and kept and shrinking and _same_type(ck, out, v)):
                    result.fail(procedure="push_away", structure=entry.name, v=v, w=u, result=int(out))

    result.checked = sum(calls.values())
    result.notes["calls"] = calls
    result.notes["unavailable"] = unavailable
    _floor(result, "completed calls per procedure", min(calls.values()), k["calls"])


@criterion(10, "freeness")
def _freeness(cell, result):
    k = cell.knobs
    pool = [(e, ck) for e, ck in cell.items(k["max_worlds"])
            if e.kind in ("boost", "unfold") and check_2acyclic_char(ck)
            and (e.kind == "boost" or ck.k_copies > 0)]
    if not pool:
        _vacuous(result, "boosted structures")
        return
    gates, gated = [], 0
    for entry, ck in pool:
        if gated >= k["structures"]:
            break
        rich = richness_level(ck)
        cells = []
        for m, size in k["cells"]:
            failed = []
            if rich < size:
                failed.append(f"richness {rich} < {size}")
            if not _gated(ck, 2 * m + 1):
                failed.append(f"acyclicity < {2 * m + 1}")
            if failed:
                result.skipped += 1
                logging.info(f"{entry.name}: ({m},{size})-freeness not checked, gates {failed}")
                gates.append({"structure": entry.name, "m": m, "k": size, "gates": failed})
            else:
                cells.append((m, size))
        gated += bool(cells)
        for m, size in cells:
            report = check_mk_free(ck, m, size)
            result.checked += 1
            if not report.ok:
                result.fail(structure=entry.name, m=m, k=size, cell=report.counterexample)
    result.notes["gate_failures"] = gates
    _floor(result, "gated structures", gated, k["structures"])


@criterion(11, "upgrade")
def _upgrade(cell, result):
    k = cell.knobs
    by_source = {}
    for entry, ck in cell.items(k["max_worlds"]):
        if entry.kind != "base":
            by_source.setdefault(entry.source, []).append((entry, ck))
    pairs = []
    for source in sorted(by_source):
        group = by_source[source]
        pairs.extend((a, b) for i, a in enumerate(group) for b in group[i + 1:])
    if not pairs:
        _vacuous(result, "covering pairs")
        return
    gated = 0
    for (ea, left), (eb, right) in pairs:
        if gated >= k["pairs"]:
            break
        counted = False
        for q in k["qs"]:
            try:
                report = upgrade_experiment(left, 0, right, 0, q)
            except GatesFailed:
                result.skipped += 1
                break
            except GameError as e:
                result.fail(left=ea.name, right=eb.name, q=q, error=type(e).__name__)
                continue
            if not report.bisimilar:
                result.skipped += 1
                continue
            counted = True
            result.checked += 1
            if not report.ok:
                result.fail(left=ea.name, right=eb.name, q=q, oracle=report.oracle,
                            replay=report.replay.to_dict() if report.replay else None,
                            engine_error=report.engine_error)
        gated += counted
    result.notes["gated_pairs"] = gated
    _floor(result, "gated pairs", gated, k["pairs"])


# ---- Runner ----

def _run_cell(number, spec, entries):
    name, func = CRITERIA[number]
    result = CriterionResult(number, name)
    cell = _Cell(number, spec, entries)
    logging.info(f"Criterion {number} ({name}) started.")
    try:
        func(cell, result)
    except EpistemiaError as e:
        logging.error(f"Criterion {number} ({name}) aborted: {e}")
        result.error = f"{type(e).__name__}: {e}"
    logging.info(f"Criterion {number} ({name}): checked {result.checked}, "
                 f"{len(result.failures)} failures, passed={result.passed}.")
    return result


@criterion(12, "determinism")
def _determinism(spec, entries, results):
    """
    Regenerate the corpus and re-run the cheap criteria in memory; compare bytes.

    Runs after the other criteria, so its arguments differ from theirs.
    """
    result = CriterionResult(12, CRITERIA[12][0])
    again = build_corpus(spec.corpus)
    result.checked += 1
    if [e.dump() for e in again] != [e.dump() for e in entries]:
        result.fail(part="corpus")
    earlier = {r.number: r for r in results}
    for number in spec.knobs[12]["criteria"]:
        first = earlier.get(number) or _run_cell(number, spec, entries)
        second = _run_cell(number, spec, again)
        result.checked += 1
        if write_json(first.to_dict()) != write_json(second.to_dict()):
            result.fail(part=f"criterion {number}")
    return result


def evaluate_suite(spec, threads=None):
    """
    Generate the corpus and run the selected criteria.

    Returns:
        SuiteReport: Results in criterion order.
    """
    entries = build_corpus(spec.corpus)
    if not entries:
        logging.warning("Corpus is empty; corpus-based criteria pass vacuously.")
    numbers = [n for n in spec.criteria if n != 12]
    with ThreadPoolExecutor(max_workers=config.worker_count(threads)) as pool:
        results = list(pool.map(lambda n: _run_cell(n, spec, entries), numbers))
    if 12 in spec.criteria:
        results.append(_determinism(spec, entries, results))
    report = SuiteReport(spec, len(entries), results)
    logging.info(f"Suite: {sum(r.passed for r in results)}/{len(results)} criteria passed.")
    return report


def junit_xml(report):
    suite = ET.Element("testsuite", {
        "name": "epistemia",
        "tests": str(len(report.results)),
        "failures": str(sum(not r.passed for r in report.results)),
    })
    for r in report.results:
        case = ET.SubElement(suite, "testcase", {
            "classname": "epistemia.suite",
            "name": f"c{r.number:02d}-{r.name}",
        })
        if r.vacuous:
            ET.SubElement(case, "skipped", {"message": "vacuous"})
        if not r.passed:
            failure = ET.SubElement(case, "failure", {"message": r.error or f"{len(r.failures)} failures"})
            failure.text = json.dumps(r.failures[:10], sort_keys=True)
    return ET.tostring(suite, encoding="unicode") + "\n"


def summary_frame(report):
    return pd.DataFrame({
        "criterion": [r.number for r in report.results],
        "name": [r.name for r in report.results],
        "passed": [r.passed for r in report.results],
        "vacuous": [r.vacuous for r in report.results],
        "checked": [r.checked for r in report.results],
        "skipped": [r.skipped for r in report.results],
        "failures": [len(r.failures) for r in report.results],
    })


def run_suite(spec, out_dir, threads=None, junit=True):
    """
    Run the suite and write report.json, summary.csv and optionally junit.xml.

    Args:
        spec (SuiteSpec | str): Spec object or path to a JSON spec.

    Returns:
        int: 0 when every criterion passed, 1 otherwise.

    Raises:
        SpecParse: For a missing or malformed spec file.
    """
    if not isinstance(spec, SuiteSpec):
        spec = SuiteSpec.load(spec)
    report = evaluate_suite(spec, threads)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", newline="\n") as f:
        f.write(report.to_json())
    summary_frame(report).to_csv(os.path.join(out_dir, "summary.csv"), index=False, lineterminator="\n")
    if junit:
        with open(os.path.join(out_dir, "junit.xml"), "w", newline="\n") as f:
            f.write(junit_xml(report))
    if not report.passed:
        failed = [r.number for r in report.results if not r.passed]
        logging.error(f"Suite failed criteria: {failed}")
    return report.exit_code
