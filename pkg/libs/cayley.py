"""
Cayley structures and bisimilar coverings.

A group element is stored as the pair (permutation of the base worlds,
parity vector over the generators); the generator for the edge {w, w'}
swaps w and w' and flips its own parity bit. Multiplication acts on the
right, so the covering map is ``pi(g) = g.wperm[w0]``.
"""

import logging
from collections import deque, namedtuple
from dataclasses import dataclass

import numpy as np

from libs import config
from libs.bisim import CoveringMap, bisimulation_classes
from libs.errors import GroupTooLarge, NotConnected
from libs.kripke import CKStructure, S5Structure, UnionFind, ck_expand, is_connected

__all__ = [
    'Generator', 'GroupElement', 'CayleyStructure', 'RichnessReport', 'EDGE_SETS',
    'make_generators', 'identity', 'multiply', 'inverse', 'generator_element',
    'build_covering', 'boost_richness', 'tree_unfold', 'check_richness',
    'richness_level', 'left_translation',
]

EDGE_SETS = ("full", "spanning")

Generator = namedtuple('Generator', ['pair', 'agent', 'copy'])
GroupElement = namedtuple('GroupElement', ['wperm', 'parity'])


def identity(n_worlds):
    return GroupElement(tuple(range(n_worlds)), 0)


def generator_element(gen, index, n_worlds):
    perm = list(range(n_worlds))
    w, v = gen.pair
    perm[w], perm[v] = v, w
    return GroupElement(tuple(perm), 1 << index)


def multiply(g, h):
    """Product g·h; h acts after g on the base worlds."""
    return GroupElement(tuple(h.wperm[x] for x in g.wperm), g.parity ^ h.parity)


def inverse(g):
    inv = [0] * len(g.wperm)
    for x, y in enumerate(g.wperm):
        inv[y] = x
    return GroupElement(tuple(inv), g.parity)


def make_generators(m, edge_set="spanning", k_copies=0):
    """
    Involutive generators per agent, ordered by agent, edge, copy.

    ``full`` takes every pair and loop of every class, ``spanning`` only
    consecutive members of each class. A spanning agent without edges gets a
    loop when copies are requested, so its classes still grow.
    """
    if edge_set not in EDGE_SETS:
        raise ValueError(f"Unknown edge set {edge_set!r}")
    gens = []
    for a in range(m.n_agents):
        labels = m.partitions[a]
        pairs = []
        for block in range(int(labels.max()) + 1 if m.n_worlds else 0):
            members = [int(w) for w in np.flatnonzero(labels == block)]
            if edge_set == "full":
                for i, w in enumerate(members):
                    pairs.append((w, w))
                    pairs.extend((w, v) for v in members[i + 1:])
            else:
                pairs.extend(zip(members, members[1:]))
        if not pairs and edge_set == "spanning" and k_copies > 0:
            pairs.append((0, 0))
        for pair in sorted(pairs):
            for copy in range(k_copies + 1):
                gens.append(Generator(pair, a, copy))
    return gens


class CayleyStructure(CKStructure):
    """
    CK structure on group elements (or reduced words, when truncated).

    Attributes:
        elements (list): GroupElement per world, or generator-index tuples for unfoldings.
        generators (list): Generator per index.
        step (np.ndarray): (n_generators, n_worlds) index of g·e, -1 outside a truncation.
        source (S5Structure): The covered structure.
        base_world (int): w0.
        world_map (np.ndarray): Covering map pi.
        truncated (int | None): Word length bound of an unfolding.
    """

    def __init__(self, base, blocks, elements, generators, step, source, base_world,
                 world_map, edge_set, k_copies, truncated=None):
        super().__init__(base, blocks)
        self.elements = elements
        self.generators = generators
        self.step = step
        self.source = source
        self.base_world = base_world
        self.world_map = world_map
        self.edge_set = edge_set
        self.k_copies = k_copies
        self.truncated = truncated
        self.index = {g: i for i, g in enumerate(elements)}

    @property
    def acyclic_by_construction(self):
        return self.truncated is not None

    def covering(self):
        target = self.memo("target", lambda: ck_expand(self.source))
        return CoveringMap(self, target, self.world_map)

    def covering_dict(self):
        out = {
            "base": self.base_world,
            "copies": self.k_copies,
            "edges": self.edge_set,
            "generators": [
                {"agent": self.source.agents[g.agent], "copy": g.copy, "pair": list(g.pair)}
                for g in self.generators
            ],
            "map": [int(x) for x in self.world_map],
        }
        if self.truncated is not None:
            out["truncated"] = self.truncated
        return out

    def __repr__(self):
        kind = f"truncated({self.truncated})" if self.truncated is not None else "group"
        return f"CayleyStructure({kind}, worlds={self.n_worlds}, generators={len(self.generators)})"


def _check_source(m, w0):
    if not 0 <= w0 < m.n_worlds:
        raise NotConnected(f"Base world {w0} outside the structure")
    if not is_connected(ck_expand(m)):
        raise NotConnected("Covering construction needs a connected structure")


def _assemble(m, w0, elements, gens, step, world_map, edge_set, k_copies, truncated=None):
    n = len(elements)
    partitions = np.zeros((m.n_agents, n), dtype=np.int32)
    for a in range(m.n_agents):
        uf = UnionFind(n)
        for j, gen in enumerate(gens):
            if gen.agent != a:
                continue
            for i in range(n):
                k = int(step[j, i])
                if k >= 0:
                    uf.union(i, k)
        partitions[a] = uf.labels()
    valuation = m.valuation[:, world_map] if m.n_worlds else np.zeros((len(m.prop_names), n), dtype=bool)
    base = S5Structure(m.agents, partitions, valuation.astype(bool), m.prop_names, loops=False)
    blocks = ck_expand(base).blocks
    return CayleyStructure(base, blocks, elements, gens, step, m, w0, world_map,
                           edge_set, k_copies, truncated)


def build_covering(m, w0=0, edge_set="spanning", k_copies=0, cap=None):
    """
    Cayley covering of a connected S5 structure.

    The group is enumerated breadth-first from the identity; the
    agent classes are the components under that agent's generators.

    Raises:
        NotConnected: For disconnected input.
        GroupTooLarge: When the element count passes the cap.
    """
    _check_source(m, w0)
    cap = cap if cap is not None else config.group_cap()
    gens = make_generators(m, edge_set, k_copies)
    images = [generator_element(g, j, m.n_worlds) for j, g in enumerate(gens)]

    start = identity(m.n_worlds)
    elements = [start]
    index = {start: 0}
    rows = [[] for _ in gens]
    i = 0
    while i < len(elements):
        g = elements[i]
        for j, e in enumerate(images):
            h = multiply(g, e)
            k = index.get(h)
            if k is None:
                if len(elements) >= cap:
                    raise GroupTooLarge(cap)
                k = len(elements)
                index[h] = k
                elements.append(h)
            rows[j].append(k)
        i += 1
    step = np.array(rows, dtype=np.int64).reshape(len(gens), len(elements))
    world_map = np.array([g.wperm[w0] for g in elements], dtype=np.int64)
    logging.info(f"Cayley group: {len(elements)} elements from {len(gens)} generators ({edge_set}, copies={k_copies}).")
    return _assemble(m, w0, elements, gens, step, world_map, edge_set, k_copies)


def boost_richness(m, w0=0, k=2, edge_set="spanning", cap=None):
    """Covering with every generator duplicated k times over fresh parity coordinates."""
    return build_covering(m, w0, edge_set, k_copies=k, cap=cap)


def tree_unfold(m, w0=0, depth=2, edge_set="spanning", k_copies=0, cap=None):
    """
    Free-group unfolding truncated to reduced words of length <= depth.

    Words of maximal length have no fresh outgoing letters; classes are
    computed inside the truncation.
    """
    _check_source(m, w0)
    if depth < 1:
        raise ValueError("Unfolding depth must be at least 1")
    cap = cap if cap is not None else config.group_cap()
    gens = make_generators(m, edge_set, k_copies)
    images = [generator_element(g, j, m.n_worlds) for j, g in enumerate(gens)]

    words = [()]
    index = {(): 0}
    positions = [w0]
    frontier = deque([0])
    while frontier:
        i = frontier.popleft()
        word = words[i]
        if len(word) == depth:
            continue
        for j in range(len(gens)):
            if word and word[-1] == j:
                continue
            if len(words) >= cap:
                raise GroupTooLarge(cap)
            nxt = word + (j,)
            index[nxt] = len(words)
            words.append(nxt)
            positions.append(images[j].wperm[positions[i]])
            frontier.append(index[nxt])

    step = np.full((len(gens), len(words)), -1, dtype=np.int64)
    for i, word in enumerate(words):
        for j in range(len(gens)):
            if word and word[-1] == j:
                step[j, i] = index[word[:-1]]
            else:
                step[j, i] = index.get(word + (j,), -1)
    world_map = np.array(positions, dtype=np.int64)
    logging.info(f"Tree unfolding: {len(words)} words of length <= {depth} over {len(gens)} generators.")
    return _assemble(m, w0, words, gens, step, world_map, edge_set, k_copies, truncated=depth)


@dataclass(frozen=True)
class RichnessReport:
    ok: bool
    k: int
    alpha: int = None
    cls: int = None
    block: int = None
    count: int = None

    def to_dict(self):
        return {"ok": self.ok, "k": self.k, "alpha": self.alpha, "class": self.cls,
                "block": self.block, "count": self.count}


def _class_counts(c, alpha, labels):
    for cls, members in enumerate(c.class_lists(alpha)):
        types, counts = np.unique(labels[list(members)], return_counts=True)
        yield cls, types, counts


def check_richness(c, k, include_empty=False):
    """
    Whether every bisimulation type realised in an alpha-class occurs there at least k times.

    The empty coalition is skipped unless ``include_empty``: its classes are
    singletons, so no structure is 2-rich under that reading.

    Returns:
        RichnessReport: ok, or the first violating (alpha, class, block, count).
    """
    if k <= 1:
        return RichnessReport(True, k)
    labels = bisimulation_classes(c)
    for alpha in c.coalitions:
        if alpha == 0 and not include_empty:
            continue
        for cls, types, counts in _class_counts(c, alpha, labels):
            low = int(np.argmin(counts))
            if counts[low] < k:
                return RichnessReport(False, k, alpha, cls, int(types[low]), int(counts[low]))
    return RichnessReport(True, k)


def richness_level(c, include_empty=False):
    """Largest k for which the structure is k-rich."""
    labels = bisimulation_classes(c)
    level = None
    for alpha in c.coalitions:
        if alpha == 0 and not include_empty:
            continue
        for _, _, counts in _class_counts(c, alpha, labels):
            low = int(counts.min())
            level = low if level is None else min(level, low)
    return level if level is not None else 0


def left_translation(c, k):
    """World map x -> k·x for a group covering."""
    if c.truncated is not None:
        raise ValueError("Left translation needs a full group, not a truncation")
    return np.array([c.index[multiply(k, g)] for g in c.elements], dtype=np.int64)
