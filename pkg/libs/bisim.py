"""
Bisimulation equivalence on CK structures: coarsest stable partitions,
bounded refinement levels and bisimilar-covering checks.
"""

import logging
from collections import deque, namedtuple
from dataclasses import dataclass

import numpy as np

from libs.errors import CoveringError, NotBisimilar, NotHomomorphism, NotSurjective
from libs.kripke import CKStructure, canonical_blocks, check_signature, ck_expand, disjoint_union

__all__ = [
    'BisimPartition', 'CoveringMap', 'PartitionRefinement', 'coarsest_bisimulation',
    'bisimulation_classes', 'refinement_levels', 'lbisim_classes', 'l_bisimilar',
    'check_covering', 'is_covering', 'union_structure',
]

MODES = ("s5", "ck")


@dataclass(frozen=True, eq=False)
class BisimPartition:
    """Block id of every world of the disjoint union, split back into both sides."""
    left_blocks: np.ndarray
    right_blocks: np.ndarray
    rounds_to_stabilize: int
    mode: str

    def same(self, w, v):
        return bool(self.left_blocks[w] == self.right_blocks[v])

    def to_dict(self):
        return {
            "mode": self.mode,
            "rounds_to_stabilize": self.rounds_to_stabilize,
            "left": [int(b) for b in self.left_blocks],
            "right": [int(b) for b in self.right_blocks],
        }


CoveringMap = namedtuple('CoveringMap', ['source', 'target', 'world_map'])


class PartitionRefinement:
    """
    Partition refinement over a fixed item set.

    ``refine(S)`` splits every block A into A & S and A - S and reports the
    pairs that actually changed.
    """

    def __init__(self, blocks):
        self.sets = {}
        self.partition = {}
        for block in blocks:
            block = set(block)
            self.sets[id(block)] = block
            for x in block:
                self.partition[x] = block

    def refine(self, S):
        hit = {}
        output = []
        for x in S:
            if x in self.partition:
                Ax = self.partition[x]
                hit.setdefault(id(Ax), set()).add(x)
        for A, AS in hit.items():
            A = self.sets[A]
            if AS != A:
                self.sets[id(AS)] = AS
                for x in AS:
                    self.partition[x] = AS
                A -= AS
                output.append((AS, A))
        return output

    def labels(self, n):
        raw = np.zeros(n, dtype=np.int64)
        for x, block in self.partition.items():
            raw[x] = min(block)
        return canonical_blocks(raw)


def _relations(ck, mode):
    if mode not in MODES:
        raise ValueError(f"Unknown bisimulation mode {mode!r}")
    if mode == "s5":
        return [ck.base.partitions[a] for a in range(ck.n_agents)]
    return [ck.blocks[alpha] for alpha in range(1, ck.full + 1)]


def _as_ck(m):
    return m if isinstance(m, CKStructure) else ck_expand(m)


def _stable_partition(ck, mode):
    """Coarsest partition refining atomic types and stable under every relation."""
    n = ck.n_worlds
    relations = _relations(ck, mode)
    atoms = ck.atom_codes
    initial = {}
    for x in range(n):
        initial.setdefault(int(atoms[x]), []).append(x)
    refiner = PartitionRefinement(initial.values())
    members_of = []
    for labels in relations:
        classes = {}
        for x in range(n):
            classes.setdefault(int(labels[x]), []).append(x)
        members_of.append(classes)

    queue = deque((frozenset(block), 0) for block in refiner.sets.values())
    rounds = 0
    while queue:
        splitter, generation = queue.popleft()
        for labels, classes in zip(relations, members_of):
            hit = {int(labels[x]) for x in splitter}
            pre = [y for c in hit for y in classes[c]]
            for part, rest in refiner.refine(pre):
                rounds = max(rounds, generation + 1)
                queue.append((frozenset(part), generation + 1))
                queue.append((frozenset(rest), generation + 1))
    return refiner.labels(n), rounds


def union_structure(m, n):
    """CK-expansion of the disjoint union of two structures."""
    m, n = _as_ck(m), _as_ck(n)
    check_signature(m.base, n.base)
    return m, n, ck_expand(disjoint_union(m.base, n.base))


def coarsest_bisimulation(m, n, mode="ck"):
    """
    Coarsest bisimulation between two structures.

    Args:
        m, n: CKStructure or S5Structure with the same signature.
        mode (str): "s5" uses the agent relations, "ck" every coalition relation.

    Returns:
        BisimPartition

    Raises:
        SignatureMismatch: If agents or propositions differ.
    """
    m, n, union = union_structure(m, n)
    labels, rounds = _stable_partition(union, mode)
    logging.debug(f"Bisimulation ({mode}) stable after {rounds} splitter generations.")
    return BisimPartition(labels[:m.n_worlds], labels[m.n_worlds:], rounds, mode)


def bisimulation_classes(ck, mode="ck"):
    """Coarsest bisimulation of a structure with itself, as block labels."""
    ck = _as_ck(ck)
    return ck.memo(("bisim", mode), lambda: _stable_partition(ck, mode)[0])


def refinement_levels(ck, ell, mode="ck"):
    """
    The ∼^j partitions of one structure for j = 0..ell.

    Level j+1 splits level j by the set of level-j types met in each class.
    """
    ck = _as_ck(ck)
    relations = _relations(ck, mode)
    levels = [canonical_blocks(ck.atom_codes)]
    while len(levels) <= ell:
        prev = levels[-1]
        summaries = []
        for labels in relations:
            seen = {}
            for x in range(ck.n_worlds):
                seen.setdefault(int(labels[x]), set()).add(int(prev[x]))
            frozen = {c: tuple(sorted(types)) for c, types in seen.items()}
            summaries.append([frozen[int(labels[x])] for x in range(ck.n_worlds)])
        signatures = [(int(prev[x]),) + tuple(s[x] for s in summaries) for x in range(ck.n_worlds)]
        index = {}
        raw = np.array([index.setdefault(sig, len(index)) for sig in signatures], dtype=np.int64)
        nxt = canonical_blocks(raw) if ck.n_worlds else raw.astype(np.int32)
        if len(index) == (int(prev.max()) + 1 if ck.n_worlds else 0):
            levels.extend([prev] * (ell + 1 - len(levels)))
            break
        levels.append(nxt)
    return levels


def lbisim_classes(m, n, ell, mode="ck"):
    """∼^j labels for the disjoint union of m and n, j = 0..ell."""
    m, n, union = union_structure(m, n)
    return refinement_levels(union, ell, mode), m.n_worlds


def l_bisimilar(m, w, n, v, ell, mode="ck"):
    """Whether Duplicator survives ell rounds of the bisimulation game from (m, w), (n, v)."""
    levels, shift = lbisim_classes(m, n, ell, mode)
    return bool(levels[ell][w] == levels[ell][shift + v])


def check_covering(cm):
    """
    Verify a bisimilar covering.

    Returns:
        bool: True when every check passes.

    Raises:
        NotSurjective, NotHomomorphism, NotBisimilar: With a witness.
    """
    source, target = _as_ck(cm.source), _as_ck(cm.target)
    check_signature(source.base, target.base)
    pi = np.asarray(cm.world_map, dtype=np.int64)
    if pi.shape != (source.n_worlds,) or (len(pi) and (pi.min() < 0 or pi.max() >= target.n_worlds)):
        raise NotSurjective("World map is not total on the source", witness=None)
    missing = sorted(set(range(target.n_worlds)) - {int(x) for x in pi})
    if missing:
        raise NotSurjective(f"World {missing[0]} has no preimage", witness=missing[0])

    for x in range(source.n_worlds):
        if not np.array_equal(source.valuation[:, x], target.valuation[:, pi[x]]):
            raise NotHomomorphism(f"Valuation differs at {x} -> {int(pi[x])}", witness=(x, int(pi[x])))
    for a in range(source.n_agents):
        image = {}
        for x in range(source.n_worlds):
            cls = int(source.base.partitions[a][x])
            tgt = int(target.base.partitions[a][pi[x]])
            if cls in image and image[cls][1] != tgt:
                y = image[cls][0]
                raise NotHomomorphism(f"Edge ({y},{x}) of agent {source.agents[a]} is not preserved",
                                      witness=(y, x, source.agents[a]))
            image.setdefault(cls, (x, tgt))

    part = coarsest_bisimulation(source, target, mode="ck")
    for x in range(source.n_worlds):
        if not part.same(x, int(pi[x])):
            raise NotBisimilar(f"World {x} is not bisimilar to its image {int(pi[x])}", witness=x)
    return True


def is_covering(cm):
    try:
        return check_covering(cm)
    except CoveringError as e:
        logging.info(f"Not a bisimilar covering: {e}")
        return False
