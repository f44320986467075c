"""
S5 Kripke structures and their common-knowledge expansions.

Agents are dense indices, coalitions are integer bitmasks over them, and every
partition is stored as a block-id array (world -> canonical block index, blocks
numbered by first occurrence).
"""

import logging
import re
from collections import namedtuple
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from libs.errors import (
    DanglingWorldId,
    EmptyStructure,
    NotEquivalence,
    SignatureMismatch,
    StrictnessViolation,
    StructureFormatError,
    UnknownAgent,
)

__all__ = [
    'MAX_AGENTS', 'Signature', 'S5Structure', 'CKStructure', 'ValidationReport',
    'UnionFind', 'check_agent_names', 'validate_s5', 'ck_expand', 'coset', 'is_connected',
    'disjoint_union', 'canonical_blocks', 'coalition_mask', 'coalition_names',
    'format_coalition', 'parse_coalition', 'agents_of', 'popcount', 'comparable',
    'lowest_world', 'subclasses',
]

MAX_AGENTS = 8

# agent names must lex as formula names and not as atoms or constants
_AGENT_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_RESERVED_NAME = re.compile(r"p[0-9]+|T|F")

Signature = namedtuple('Signature', ['agents', 'props'])


# ---- Coalitions ----

def popcount(mask):
    return bin(mask).count("1")


def agents_of(mask):
    """Agent indices contained in a coalition mask, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def coalition_mask(names, agents):
    """Bitmask of the named agents; unknown names raise KeyError."""
    index = {name: i for i, name in enumerate(agents)}
    mask = 0
    for name in names:
        mask |= 1 << index[name]
    return mask


def coalition_names(mask, agents):
    return [agents[i] for i in agents_of(mask)]


def comparable(a, b):
    """Whether one coalition contains the other."""
    inter = a & b
    return inter == a or inter == b


def lowest_world(bits):
    """Smallest world in a bitmask of worlds."""
    return (bits & -bits).bit_length() - 1


def format_coalition(mask, agents):
    """Comma separated agent names, '' for the empty coalition."""
    return ",".join(coalition_names(mask, agents))


def parse_coalition(text, agents):
    text = text.strip()
    if not text:
        return 0
    mask = 0
    for name in text.split(","):
        name = name.strip()
        if name not in agents:
            raise UnknownAgent(name)
        mask |= 1 << agents.index(name)
    return mask


def canonical_blocks(labels):
    """Renumber block labels by order of first occurrence."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(np.int32).reshape(labels.shape)


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by rank."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x):
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        for y in path:
            self.parent[y] = x
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return rx
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1
        return rx

    def labels(self):
        return canonical_blocks([self.find(x) for x in range(len(self.parent))])


# ---- Structures ----

@dataclass(frozen=True, eq=False)
class S5Structure:
    """
    Multi-agent S5 structure.

    Attributes:
        agents (tuple): Agent names, index = AgentId.
        partitions (np.ndarray): (n_agents, n_worlds) block ids per agent.
        valuation (np.ndarray): (n_props, n_worlds) truth table.
        prop_names (tuple): Proposition labels, index = proposition id.
        loops (bool): Whether the source listed explicit reflexive loops.
    """
    agents: tuple
    partitions: np.ndarray
    valuation: np.ndarray
    prop_names: tuple
    loops: bool = False

    @property
    def n_worlds(self):
        return int(self.partitions.shape[1])

    @property
    def n_agents(self):
        return len(self.agents)

    @property
    def signature(self):
        return Signature(tuple(self.agents), tuple(self.prop_names))

    @cached_property
    def atom_codes(self):
        """Atomic type of every world packed into one integer."""
        codes = np.zeros(self.n_worlds, dtype=np.int64)
        for i in range(len(self.prop_names)):
            codes |= self.valuation[i].astype(np.int64) << i
        return codes

    def blocks_of(self, agent):
        return self.partitions[agent]


@dataclass(frozen=True)
class ValidationReport:
    """Pairs missing from an agent relation for it to be an equivalence relation."""
    missing_pairs: dict = field(default_factory=dict)
    missing_loops: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not any(self.missing_pairs.values()) and not any(self.missing_loops.values())

    def to_error(self):
        if any(self.missing_loops.values()):
            return StrictnessViolation("Strict input is missing reflexive loops", report=self)
        return NotEquivalence("Input relation is not transitive", report=self)

    def to_dict(self):
        return {
            "missing_pairs": {a: [list(p) for p in pairs] for a, pairs in self.missing_pairs.items()},
            "missing_loops": {a: list(ws) for a, ws in self.missing_loops.items()},
        }


def check_agent_names(agents):
    """
    Raises:
        StructureFormatError: For names the formula parser would read as an
            atom, a constant or not at all.
    """
    for name in agents:
        if not isinstance(name, str) or not _AGENT_NAME.fullmatch(name) or _RESERVED_NAME.fullmatch(name):
            raise StructureFormatError(f"Agent name {name!r} is reserved or not a formula name")


def validate_s5(raw_edges, n_worlds, valuation=None, agents=None, prop_names=None, strict=False):
    """
    Check per-agent edge lists and build the partition representation.

    Args:
        raw_edges (dict): agent name -> iterable of (w, w') pairs.
        n_worlds (int): Number of worlds.
        valuation (dict): proposition name -> iterable of worlds.
        agents (list, optional): Agent order; defaults to the edge dict order.
        prop_names (list, optional): Proposition order; defaults to the valuation order.
        strict (bool): Require explicit loops [w, w].

    Returns:
        S5Structure | ValidationReport: The structure if every relation,
        closed reflexively and symmetrically, is already transitive.
    """
    valuation = valuation or {}
    agents = tuple(agents if agents is not None else raw_edges.keys())
    prop_names = tuple(prop_names if prop_names is not None else valuation.keys())
    if len(agents) > MAX_AGENTS:
        raise ValueError(f"At most {MAX_AGENTS} agents supported, got {len(agents)}")
    check_agent_names(agents)

    partitions = np.zeros((len(agents), n_worlds), dtype=np.int32)
    missing_pairs, missing_loops = {}, {}
    had_loops = False
    for a, name in enumerate(agents):
        edges = [tuple(e) for e in raw_edges.get(name, [])]
        for w, v in edges:
            for x in (w, v):
                if not 0 <= x < n_worlds:
                    raise DanglingWorldId(x, n_worlds)
        relation = set()
        loops = set()
        for w, v in edges:
            relation.add((min(w, v), max(w, v)))
            if w == v:
                loops.add(w)
        had_loops = had_loops or bool(loops)
        if strict:
            absent = sorted(set(range(n_worlds)) - loops)
            if absent:
                missing_loops[name] = absent

        uf = UnionFind(n_worlds)
        for w, v in relation:
            uf.union(w, v)
        labels = uf.labels()
        partitions[a] = labels

        # closure pairs must already be present in the input
        gaps = []
        for block in range(int(labels.max()) + 1 if n_worlds else 0):
            members = np.flatnonzero(labels == block)
            for i, w in enumerate(members):
                for v in members[i + 1:]:
                    if (int(w), int(v)) not in relation:
                        gaps.append((int(w), int(v)))
        if gaps:
            missing_pairs[name] = gaps

    if any(missing_pairs.values()) or any(missing_loops.values()):
        report = ValidationReport(missing_pairs, missing_loops)
        logging.info(f"Validation failed: {sum(map(len, missing_pairs.values()))} missing pairs, "
                     f"{sum(map(len, missing_loops.values()))} missing loops.")
        return report

    table = np.zeros((len(prop_names), n_worlds), dtype=bool)
    for i, name in enumerate(prop_names):
        for w in valuation.get(name, []):
            if not 0 <= w < n_worlds:
                raise DanglingWorldId(w, n_worlds)
            table[i, w] = True
    return S5Structure(agents, partitions, table, prop_names, loops=had_loops or strict)


def s5_from_blocks(agents, blocks, valuation=None, prop_names=None, loops=False):
    """Build an S5Structure directly from per-agent block labels."""
    check_agent_names(agents)
    blocks = np.asarray(blocks)
    n = blocks.shape[1] if blocks.ndim == 2 else 0
    partitions = np.array([canonical_blocks(row) for row in blocks], dtype=np.int32).reshape(len(agents), n)
    if valuation is None:
        valuation = np.zeros((0, n), dtype=bool)
    valuation = np.asarray(valuation, dtype=bool)
    rows = valuation.shape[0] if valuation.ndim == 2 else (valuation.size // n if n else 0)
    valuation = valuation.reshape(rows, n)
    if prop_names is None:
        prop_names = tuple(f"p{i}" for i in range(valuation.shape[0]))
    return S5Structure(tuple(agents), partitions, valuation, tuple(prop_names), loops)


class CKStructure:
    """
    CK-expansion of an S5 structure.

    ``blocks[alpha, w]`` is the canonical class id of w under R_alpha, the
    transitive closure of the union of the agent relations in alpha.
    """

    def __init__(self, base, blocks):
        self.base = base
        self.blocks = blocks
        self._memo = {}

    @property
    def n_worlds(self):
        return self.base.n_worlds

    @property
    def agents(self):
        return self.base.agents

    @property
    def n_agents(self):
        return self.base.n_agents

    @property
    def full(self):
        return (1 << self.n_agents) - 1

    @property
    def coalitions(self):
        return range(1 << self.n_agents)

    @property
    def valuation(self):
        return self.base.valuation

    @property
    def prop_names(self):
        return self.base.prop_names

    @property
    def signature(self):
        return self.base.signature

    @property
    def atom_codes(self):
        return self.base.atom_codes

    def block(self, alpha, w):
        return int(self.blocks[alpha, w])

    def n_classes(self, alpha):
        return int(self.blocks[alpha].max()) + 1 if self.n_worlds else 0

    def same_class(self, alpha, w, v):
        return self.blocks[alpha, w] == self.blocks[alpha, v]

    def class_lists(self, alpha):
        """Members of every alpha-class, indexed by class id."""
        key = ("lists", alpha)
        if key not in self._memo:
            row = self.blocks[alpha]
            order = np.argsort(row, kind="stable")
            cuts = np.flatnonzero(np.diff(row[order])) + 1
            self._memo[key] = [tuple(int(x) for x in part) for part in np.split(order, cuts)] if len(row) else []
        return self._memo[key]

    def members(self, alpha, cls):
        return self.class_lists(alpha)[cls]

    def class_bits(self, alpha, cls):
        """Members of an alpha-class as an int bitmask over worlds."""
        key = ("bits", alpha)
        if key not in self._memo:
            bits = []
            for members in self.class_lists(alpha):
                mask = 0
                for w in members:
                    mask |= 1 << w
                bits.append(mask)
            self._memo[key] = bits
        return self._memo[key][cls]

    def coset_bits(self, w, alpha):
        return self.class_bits(alpha, self.block(alpha, w))

    def memo(self, key, build):
        """Cache a derived, read-only artefact on the structure."""
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    def __repr__(self):
        return f"CKStructure(worlds={self.n_worlds}, agents={list(self.agents)}, props={list(self.prop_names)})"


def ck_expand(m):
    """
    Compute the partition of every coalition.

    The alpha partition is the join of the partition for alpha minus its
    highest agent with that agent's partition.
    """
    n = m.n_worlds
    size = 1 << m.n_agents
    blocks = np.zeros((size, n), dtype=np.int32)
    blocks[0] = np.arange(n, dtype=np.int32)
    for alpha in range(1, size):
        top = alpha.bit_length() - 1
        rest = alpha & ~(1 << top)
        if rest == 0:
            blocks[alpha] = canonical_blocks(m.partitions[top])
            continue
        uf = UnionFind(n)
        for labels in (blocks[rest], m.partitions[top]):
            first = {}
            for w in range(n):
                b = int(labels[w])
                if b in first:
                    uf.union(first[b], w)
                else:
                    first[b] = w
        blocks[alpha] = uf.labels()
    return CKStructure(m, blocks)


def coset(ck, w, alpha):
    """The class [w]_alpha as a set of worlds."""
    if not 0 <= w < ck.n_worlds:
        raise DanglingWorldId(w, ck.n_worlds)
    return set(ck.members(alpha, ck.block(alpha, w)))


def subclasses(ck, alpha, beta, cls):
    """Ids of the beta-classes inside the alpha-class cls, for beta contained in alpha."""
    table = ck.memo(("inner", alpha, beta), lambda: [
        sorted({int(b) for b in np.unique(ck.blocks[beta][list(members)])})
        for members in ck.class_lists(alpha)
    ])
    return table[cls]


def is_connected(ck):
    if ck.n_worlds == 0:
        raise EmptyStructure("Connectivity of an empty structure is undefined")
    return ck.n_classes(ck.full) == 1


def check_signature(m, n):
    if tuple(m.agents) != tuple(n.agents) or tuple(m.prop_names) != tuple(n.prop_names):
        raise SignatureMismatch(m.signature, n.signature)


def disjoint_union(m, n):
    """
    Disjoint union of two S5 structures; worlds of n are shifted by m.n_worlds.

    Raises:
        SignatureMismatch: If agents or propositions differ.
    """
    check_signature(m, n)
    shift = m.partitions.max(axis=1, keepdims=True) + 1 if m.n_worlds else 0
    partitions = np.concatenate([m.partitions, n.partitions + shift], axis=1)
    partitions = np.array([canonical_blocks(row) for row in partitions], dtype=np.int32).reshape(partitions.shape)
    valuation = np.concatenate([m.valuation, n.valuation], axis=1)
    return S5Structure(m.agents, partitions, valuation, m.prop_names, m.loops and n.loops)
