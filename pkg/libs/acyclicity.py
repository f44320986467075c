"""
Coset cycles, n-acyclicity and the agt map of 2-acyclic frames.

A cycle search state is (hinge class, previous coalition, current
coalition): the hinge is the (prev & cur)-class that the cycle passes
through. Only the hinge matters for the disjointness conditions, so worlds
are read off the hinge when a witness is reported.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from libs import config
from libs.errors import NoLeastElement, Not2Acyclic, NotConnectedTuple
from libs.kripke import comparable, coset, format_coalition, lowest_world, subclasses

__all__ = [
    'CosetCycle', 'LawReport', 'find_coset_cycle', 'verify_cycle', 'is_n_acyclic',
    'acyclicity_level', 'check_2acyclic_char', 'require_2acyclic', 'agt', 'agt_table',
    'verify_agt_steps', 'check_triangle_law', 'check_intersection_law',
]


@dataclass(frozen=True)
class CosetCycle:
    """Cyclic tuple of (world, coalition) pairs."""
    steps: tuple

    def __len__(self):
        return len(self.steps)

    def to_list(self, agents=None):
        if agents is None:
            return [[w, alpha] for w, alpha in self.steps]
        return [[w, format_coalition(alpha, agents)] for w, alpha in self.steps]


@dataclass
class LawReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {"name": self.name, "checked": self.checked, "ok": self.ok,
                "violations": self.violations[:20]}


def _successors(ck, state):
    hinge, prev, cur = state
    beta = prev & cur
    hbits = ck.class_bits(beta, hinge)
    c_cls = ck.block(cur, lowest_world(hbits))
    for nxt in ck.coalitions:
        if nxt == 0 or comparable(cur, nxt):
            continue
        gamma = cur & nxt
        for g in subclasses(ck, cur, gamma, c_cls):
            if ck.class_bits(gamma, g) & hbits == 0:
                yield (g, cur, nxt)


def _start_states(ck):
    for prev in ck.coalitions:
        for cur in ck.coalitions:
            if prev == 0 or cur == 0 or comparable(prev, cur):
                continue
            for hinge in range(ck.n_classes(prev & cur)):
                yield (hinge, prev, cur)


def _search(ck, start, length):
    """Cycles of exactly ``length`` steps whose smallest state is ``start``."""
    path = [start]
    on_path = {start}
    stack = [iter(_successors(ck, start))]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            on_path.discard(path.pop())
            continue
        if len(path) == length:
            if nxt == start:
                return list(path)
            continue
        if nxt < start or nxt in on_path:
            continue
        path.append(nxt)
        on_path.add(nxt)
        stack.append(iter(_successors(ck, nxt)))
    return None


def _to_cycle(ck, states):
    steps = []
    for hinge, prev, cur in states:
        steps.append((lowest_world(ck.class_bits(prev & cur, hinge)), cur))
    return CosetCycle(tuple(steps))


def find_coset_cycle(ck, n=None):
    """
    Shortest coset cycle of length <= n, or None.

    Consecutive coalitions of a cycle are never comparable under inclusion
    (and never empty), which prunes most of the state space.
    """
    n = config.CYCLE_CAP if n is None else n
    if n < 2:
        raise ValueError("Coset cycles have length at least 2")
    starts = sorted(_start_states(ck))
    for length in range(2, n + 1):
        for start in starts:
            states = _search(ck, start, length)
            if states is not None:
                cycle = _to_cycle(ck, states)
                logging.debug(f"Coset cycle of length {length}: {cycle.steps}")
                return cycle
    return None


def verify_cycle(ck, cycle):
    """Check the coset cycle conditions on a (world, coalition) tuple."""
    steps = list(cycle.steps if isinstance(cycle, CosetCycle) else cycle)
    m = len(steps)
    if m < 2:
        return False
    for i in range(m):
        w, alpha = steps[i]
        w_next, alpha_next = steps[(i + 1) % m]
        alpha_prev = steps[i - 1][1]
        if not ck.same_class(alpha, w, w_next):
            return False
        if coset(ck, w, alpha_prev & alpha) & coset(ck, w_next, alpha & alpha_next):
            return False
    return True


def is_n_acyclic(ck, n):
    if n < 2:
        return True
    return find_coset_cycle(ck, n) is None


def acyclicity_level(ck, cap=None):
    """
    Largest n <= cap for which the frame is verified n-acyclic.

    Truncated free-group unfoldings are acyclic by construction and report
    the cap without a search.
    """
    cap = config.CYCLE_CAP if cap is None else cap
    if getattr(ck, "truncated", None) is not None:
        return cap
    cycle = find_coset_cycle(ck, cap) if cap >= 2 else None
    return cap if cycle is None else len(cycle) - 1


def _2acyclic_violation(ck):
    """First (w, alpha, beta) with [w]_alpha & [w]_beta != [w]_(alpha & beta)."""
    for alpha in ck.coalitions:
        for beta in range(alpha + 1, ck.full + 1):
            meet = ck.blocks[alpha].astype(np.int64) * (ck.n_worlds + 1) + ck.blocks[beta]
            if len(np.unique(meet)) == ck.n_classes(alpha & beta):
                continue
            for w in range(ck.n_worlds):
                if coset(ck, w, alpha) & coset(ck, w, beta) != coset(ck, w, alpha & beta):
                    return (w, alpha, beta)
    return None


def check_2acyclic_char(ck):
    """Whether [w]_alpha & [w]_beta = [w]_(alpha & beta) for all w, alpha, beta."""
    return ck.memo("2acyclic", lambda: _2acyclic_violation(ck) is None)


def require_2acyclic(ck):
    if not check_2acyclic_char(ck):
        w, alpha, beta = _2acyclic_violation(ck)
        raise Not2Acyclic(witness={"world": w, "alpha": alpha, "beta": beta})


def agt(ck, worlds):
    """
    The least coalition connecting all given worlds.

    Raises:
        Not2Acyclic: When the frame fails the 2-acyclicity identity.
        NotConnectedTuple: When the worlds are not in one common-knowledge class.
        NoLeastElement: When the meet of connecting coalitions does not connect.
    """
    require_2acyclic(ck)
    worlds = list(worlds)
    if not worlds:
        raise NotConnectedTuple("agt needs at least one world")
    row = ck.blocks[:, worlds]
    connecting = [alpha for alpha in ck.coalitions if np.all(row[alpha] == row[alpha, 0])]
    if not connecting:
        raise NotConnectedTuple(f"Worlds {worlds} are not connected")
    least = ck.full
    for alpha in connecting:
        least &= alpha
    if least not in connecting:
        raise NoLeastElement(f"No least connecting coalition for {worlds}")
    return least


def agt_table(ck):
    """
    Pairwise agt as an (n, n) array; -1 for worlds in different components.
    """
    def build():
        require_2acyclic(ck)
        n = ck.n_worlds
        table = np.full((n, n), ck.full, dtype=np.int64)
        for alpha in ck.coalitions:
            row = ck.blocks[alpha]
            eq = row[:, None] == row[None, :]
            table = np.where(eq, table & alpha, table)
        top = ck.blocks[ck.full]
        connected = top[:, None] == top[None, :]
        table = np.where(connected, table, -1)
        cols = np.arange(n)
        for w in range(n):
            mask = connected[w]
            alphas = table[w, mask]
            if np.any(ck.blocks[alphas, w] != ck.blocks[alphas, cols[mask]]):
                raise NoLeastElement(f"No least connecting coalition at world {w}")
        return table
    return ck.memo("agt_table", build)


def verify_agt_steps(ck):
    """
    Exhaustive check of the two agt step laws.

    Adding an agent a outside agt(w, v) and moving to v' != v in [v]_a adds
    exactly a. For a inside agt(w, v), at most one v' in [v]_a drops a.
    """
    table = agt_table(ck)
    report = LawReport("agt-steps")
    for w in range(ck.n_worlds):
        for v in range(ck.n_worlds):
            alpha = int(table[w, v])
            if alpha < 0:
                continue
            for a in range(ck.n_agents):
                bit = 1 << a
                others = [u for u in ck.members(bit, ck.block(bit, v)) if u != v]
                report.checked += 1
                if alpha & bit == 0:
                    for u in others:
                        if table[w, u] != alpha | bit:
                            report.violations.append(
                                {"clause": 1, "w": w, "v": v, "agent": a, "v_prime": u})
                else:
                    drops = [u for u in others + [v] if table[w, u] == alpha & ~bit]
                    if len(drops) > 1:
                        report.violations.append(
                            {"clause": 2, "w": w, "v": v, "agent": a, "v_primes": drops})
    logging.info(f"agt step laws: {report.checked} cases, {len(report.violations)} violations.")
    return report


def check_triangle_law(ck):
    """agt(v, z) is contained in agt(v, z0) | agt(z0, z) for all connected triples."""
    table = agt_table(ck)
    report = LawReport("agt-triangle")
    connected = table >= 0
    for z0 in range(ck.n_worlds):
        rhs = table[:, z0][:, None] | table[z0, :][None, :]
        mask = connected & connected[:, z0][:, None] & connected[z0, :][None, :]
        bad = np.argwhere(mask & ((table & ~rhs) != 0))
        report.checked += int(mask.sum())
        for v, z in bad[:5]:
            report.violations.append({"v": int(v), "z": int(z), "z0": z0})
    return report


def check_intersection_law(ck, arity=2):
    """
    Every non-empty intersection of ``arity`` cosets is a single coset of the
    intersected coalition.
    """
    report = LawReport(f"coset-intersection-{arity}")
    cosets = [(alpha, cls) for alpha in ck.coalitions for cls in range(ck.n_classes(alpha))]
    for family in combinations_with_replacement(cosets, arity):
        bits = -1
        beta = ck.full
        for alpha, cls in family:
            bits &= ck.class_bits(alpha, cls)
            beta &= alpha
        if bits == 0:
            continue
        report.checked += 1
        w = lowest_world(bits)
        if bits != ck.coset_bits(w, beta):
            report.violations.append({"family": [list(x) for x in family], "world": w, "beta": beta})
    return report
