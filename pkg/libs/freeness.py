"""
Coset paths, t-distance and the freeness witness search.

Path searches run over hinge states (beta, class, alpha): the hinge is the
[w_i]_(alpha_(i-1) & alpha_i) class the path passes through, and alpha is
the current label. Every condition on a coset path depends on the hinges
only, so reported paths use the lowest world of each hinge.
"""

import logging
import math
import numbers
from collections import deque, namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

from libs import config
from libs.acyclicity import LawReport, acyclicity_level, agt_table, check_2acyclic_char, require_2acyclic
from libs.bisim import bisimulation_classes
from libs.errors import (
    FreenessError,
    HypothesisViolated,
    InsufficientAcyclicity,
    MalformedPath,
    NoCandidate,
    PostconditionFailed,
    SameWorld,
)
from libs.hypergraph import dual, gaifman_distance
from libs.kripke import comparable, lowest_world, subclasses

__all__ = [
    'AvoidSet', 'CosetPath', 'PathFlags', 'ShortReport', 'PushStep', 'FreeReport',
    'rho', 'classify_path', 'coset_paths', 't_distance', 't_distance_set', 'short_t',
    'step_away_check', 'triangle_step', 'push_away', 'find_free_witness',
    'brute_force_witness', 'is_m_free', 'check_mk_free',
]


@dataclass(frozen=True)
class AvoidSet:
    """The classes [anchor]_beta for all beta containing gamma."""
    anchor: int
    gamma: int

    def extent(self, ck):
        return frozenset((beta, ck.block(beta, self.anchor))
                         for beta in ck.coalitions if beta & self.gamma == self.gamma)

    def dual_vertices(self, h):
        return frozenset(h.vertex(beta, cls) for beta, cls in self.extent(h.ck))

    def covered_by(self, ck, bits):
        """Whether the class ``bits`` contains [anchor]_gamma as a set."""
        core = ck.coset_bits(self.anchor, self.gamma)
        return core & ~bits == 0


def rho(ck, v, gamma):
    require_2acyclic(ck)
    return AvoidSet(v, gamma)


@dataclass(frozen=True)
class CosetPath:
    worlds: tuple
    labels: tuple

    def __len__(self):
        return len(self.labels)

    def to_list(self):
        out = [self.worlds[0]]
        for alpha, w in zip(self.labels, self.worlds[1:]):
            out.extend([alpha, w])
        return out


PathFlags = namedtuple('PathFlags', ['valid', 'nontrivial', 'inner', 'non_t'])


def _parse_path(ck, path):
    if isinstance(path, CosetPath):
        return list(path.worlds), list(path.labels)
    items = list(path)
    if len(items) < 3 or len(items) % 2 == 0:
        raise MalformedPath(f"Expected w1, a1, ..., al, w(l+1); got {len(items)} items")
    worlds, labels = items[0::2], items[1::2]
    for w in worlds:
        if not isinstance(w, numbers.Integral) or not 0 <= w < ck.n_worlds:
            raise MalformedPath(f"World {w!r} outside the structure")
    for alpha in labels:
        if not isinstance(alpha, numbers.Integral) or not 0 <= alpha <= ck.full:
            raise MalformedPath(f"Coalition {alpha!r} outside the signature")
    return [int(w) for w in worlds], [int(a) for a in labels]


def classify_path(ck, path, t=None):
    """
    Validity and flags of a coset path.

    ``nontrivial`` and ``inner`` compare every [w_i]_(alpha_i) with
    [w_1]_agt(w_1, w_last); ``non_t`` is None without an avoid set.
    """
    worlds, labels = _parse_path(ck, path)
    ell = len(labels)
    padded = [0] + labels + [0]
    valid = True
    for i in range(ell):
        w, nxt = worlds[i], worlds[i + 1]
        if not ck.same_class(labels[i], w, nxt):
            valid = False
            break
        left = ck.coset_bits(w, padded[i] & padded[i + 1])
        right = ck.coset_bits(nxt, padded[i + 1] & padded[i + 2])
        if left & right:
            valid = False
            break
    classes = [ck.coset_bits(w, alpha) for w, alpha in zip(worlds, labels)]
    nontrivial = inner = False
    if check_2acyclic_char(ck) and ell >= 2 and ck.same_class(ck.full, worlds[0], worlds[-1]):
        outer = ck.coset_bits(worlds[0], int(agt_table(ck)[worlds[0], worlds[-1]]))
        nontrivial = all(outer & ~c != 0 for c in classes)
        inner = all(c & ~outer == 0 and c != outer for c in classes)
    non_t = None
    if t is not None:
        non_t = all(not t.covered_by(ck, c) for c in classes)
    return PathFlags(valid, nontrivial, inner, non_t)


def _class_filter(ck, w, v, t=None, inner=False, nontrivial=False):
    """Predicate on [w_i]_(alpha_i) bitmasks for the requested path kind."""
    tests = []
    if t is not None:
        tests.append(lambda alpha, bits: not t.covered_by(ck, bits))
    if inner or nontrivial:
        outer = ck.coset_bits(w, int(agt_table(ck)[w, v]))
        if inner:
            tests.append(lambda alpha, bits: bits & ~outer == 0 and bits != outer)
        else:
            tests.append(lambda alpha, bits: outer & ~bits != 0)
    return lambda alpha, bits: all(test(alpha, bits) for test in tests)


def _starts(ck, w, allowed, first=None):
    labels = [first] if first is not None else list(ck.coalitions)
    for alpha in labels:
        if alpha == 0:
            continue
        if allowed(alpha, ck.coset_bits(w, alpha)):
            yield (0, w, alpha)


def _moves(ck, state, allowed):
    beta, cls, alpha = state
    hbits = ck.class_bits(beta, cls)
    home = ck.block(alpha, lowest_world(hbits))
    for nxt in ck.coalitions:
        if nxt == 0 or comparable(alpha, nxt):
            continue
        gamma = alpha & nxt
        for g in subclasses(ck, alpha, gamma, home):
            gbits = ck.class_bits(gamma, g)
            if gbits & hbits:
                continue
            if allowed(nxt, ck.coset_bits(lowest_world(gbits), nxt)):
                yield (gamma, g, nxt)


def _arrives(ck, state, v):
    beta, cls, alpha = state
    hbits = ck.class_bits(beta, cls)
    return not (hbits >> v) & 1 and ck.block(alpha, v) == ck.block(alpha, lowest_world(hbits))


def _as_path(ck, states, w, v):
    worlds = [w] + [lowest_world(ck.class_bits(beta, cls)) for beta, cls, _ in states[1:]] + [v]
    return CosetPath(tuple(worlds), tuple(alpha for _, _, alpha in states))


def _shortest(ck, w, v, cap, allowed, first=None):
    parent = {}
    frontier = deque()
    for s in _starts(ck, w, allowed, first):
        if s not in parent:
            parent[s] = None
            frontier.append((s, 1))
    while frontier:
        state, depth = frontier.popleft()
        if _arrives(ck, state, v):
            chain = [state]
            while parent[chain[-1]] is not None:
                chain.append(parent[chain[-1]])
            return _as_path(ck, chain[::-1], w, v)
        if depth == cap:
            continue
        for nxt in _moves(ck, state, allowed):
            if nxt not in parent:
                parent[nxt] = state
                frontier.append((nxt, depth + 1))
    return None


def coset_paths(ck, w, v, max_len, t=None, inner=False, nontrivial=False):
    """
    Every coset path from w to v of length <= max_len, one per hinge sequence.

    Used as the enumeration oracle for the bounded searches.
    """
    allowed = _class_filter(ck, w, v, t, inner, nontrivial)
    chain = []

    def walk(state):
        chain.append(state)
        if _arrives(ck, state, v):
            yield _as_path(ck, chain, w, v)
        if len(chain) < max_len:
            for nxt in _moves(ck, state, allowed):
                yield from walk(nxt)
        chain.pop()

    for s in _starts(ck, w, allowed):
        yield from walk(s)


def t_distance(ck, w, v, t, cap=None, path=False):
    """
    Length of a shortest non-t coset path from w to v.

    Returns:
        int | float: ``math.inf`` when no path of length <= cap exists; with
        ``path=True`` a (distance, CosetPath | None) pair.

    Raises:
        SameWorld: If w == v.
    """
    if w == v:
        raise SameWorld(f"t-distance of world {w} to itself")
    require_2acyclic(ck)
    cap = config.PATH_CAP if cap is None else cap
    found = _shortest(ck, w, v, cap, _class_filter(ck, w, v, t))
    d = len(found) if found is not None else math.inf
    return (d, found) if path else d


def t_distance_set(ck, zs, v, t, cap=None):
    zs = [z for z in zs if z != v]
    if not zs:
        return math.inf
    return min(t_distance(ck, z, v, t, cap) for z in zs)


@dataclass(frozen=True)
class ShortReport:
    """First labels of the short non-t paths and their intersection."""
    coalition: int = None
    first_labels: tuple = ()
    realized: bool = False

    def to_dict(self):
        return {"coalition": self.coalition, "first_labels": list(self.first_labels),
                "realized": self.realized}


def short_t(ck, v, z, t, n_cap=None):
    """
    Direction of the short non-t paths from v to z.

    ``coalition`` is the intersection of the first labels of all non-t paths
    of length <= n_cap (None without such a path); ``realized`` records
    whether that intersection is itself a first label.
    """
    require_2acyclic(ck)
    cap = config.PATH_CAP if n_cap is None else n_cap
    allowed = _class_filter(ck, v, z, t)
    firsts = [alpha for alpha in ck.coalitions
              if alpha and _shortest(ck, v, z, cap, allowed, first=alpha) is not None]
    if not firsts:
        return ShortReport()
    meet = ck.full
    for alpha in firsts:
        meet &= alpha
    return ShortReport(meet, tuple(firsts), meet in firsts)


def step_away_check(ck, v, z, gamma, m, acyclicity=None):
    """
    Moving away along an agent outside short_t(v, z) forces that agent into
    short_t(v', z) for every close v' in [v]_a.

    Raises:
        InsufficientAcyclicity: Unless (2m+1)-acyclicity is verified.
        HypothesisViolated: Unless gamma <= agt(v, z) and d_t(z, v) <= m.
    """
    level = acyclicity if acyclicity is not None else acyclicity_level(ck, 2 * m + 1)
    if level < 2 * m + 1:
        raise InsufficientAcyclicity(f"Verified acyclicity {level} < {2 * m + 1}")
    table = agt_table(ck)
    if table[v, z] < 0 or gamma & ~int(table[v, z]):
        raise HypothesisViolated(f"gamma is not contained in agt({v}, {z})")
    t = AvoidSet(v, gamma)
    if v == z or t_distance(ck, z, v, t, cap=m) > m:
        raise HypothesisViolated(f"d_t({z}, {v}) exceeds {m}")
    base = short_t(ck, v, z, t, m).coalition or 0
    report = LawReport("step-away")
    for a in range(ck.n_agents):
        bit = 1 << a
        if base & bit:
            continue
        for u in ck.members(bit, ck.block(bit, v)):
            if u == v or u == z or t_distance(ck, u, z, t, cap=m) > m:
                continue
            report.checked += 1
            got = short_t(ck, u, z, t, m).coalition
            if got is None or not got & bit:
                report.violations.append({"agent": a, "v_prime": u, "short": got})
    return report


def _bisimilar(ck, u, v):
    labels = bisimulation_classes(ck)
    return labels[u] == labels[v]


def triangle_step(ck, v, u, zs, z0):
    """
    Move v to a bisimilar v* keeping agt to every z in zs, with
    agt(v*, u) = agt(v*, z0) | agt(z0, u).

    Raises:
        HypothesisViolated: Unless agt(v, z) = agt(v, z0) | agt(z0, z) on zs.
        NoCandidate: When no bisimilar a-neighbour keeps the agt values.
    """
    table = agt_table(ck)
    zs = list(zs)
    for z in zs:
        if table[v, z] != table[v, z0] | table[z0, z]:
            raise HypothesisViolated(f"agt({v},{z}) is not agt({v},{z0}) | agt({z0},{z})",
                                     witness={"z": z})
    for _ in range(ck.n_agents + 1):
        a1, a2, a3 = int(table[v, z0]), int(table[z0, u]), int(table[u, v])
        missing = (a1 | a2) & ~a3
        if not missing:
            return v
        a = lowest_world(missing)
        bit = 1 << a
        keep = [(z, int(table[v, z])) for z in zs]
        candidates = [
            x for x in ck.members(bit, ck.block(bit, v))
            if x != v and _bisimilar(ck, x, v)
            and table[x, z0] == a1 and table[u, x] == a3 | bit
            and all(table[x, z] == want for z, want in keep)
        ]
        if not candidates:
            raise NoCandidate(f"No bisimilar {ck.agents[a]}-neighbour of {v} keeps agt",
                              witness={"agent": a, "world": v})
        logging.debug(f"triangle step: {v} -> {candidates[0]} along {ck.agents[a]}")
        v = candidates[0]
    raise PostconditionFailed("Triangle steps did not close the gap", witness={"world": v})


@dataclass
class PushStep:
    world: int
    agent: int
    beta: int
    gamma: int

    def to_dict(self):
        return {"world": int(self.world), "agent": int(self.agent),
                "beta": None if self.beta is None else int(self.beta), "gamma": int(self.gamma)}


def _far_candidates(ck, v, bit, w, zs, t, m, cap):
    table = agt_table(ck)
    for x in ck.members(bit, ck.block(bit, v)):
        if x == v or not _bisimilar(ck, x, v):
            continue
        if table[x, w] != table[v, w] or any(table[x, z] != table[v, z] for z in zs):
            continue
        if t_distance_set(ck, zs, x, t, cap) > m:
            yield x


def _check_shape(beta, beta0, agents_so_far):
    """beta_n is a suffix {a_j..a_n} of the chosen agents or contains beta_0 and all of them."""
    chosen = 0
    for a in agents_so_far:
        chosen |= 1 << a
    if beta & chosen == chosen and beta & beta0 == beta0:
        return True
    suffix = 0
    for a in reversed(agents_so_far):
        suffix |= 1 << a
        if beta == suffix:
            return True
    return False


def _audit_order(ck, w, visited, t, cap):
    """v_0..v_n appear on every short inner non-t path from w to v_n, in index order."""
    for path in coset_paths(ck, w, visited[-1], cap, t=t, inner=True):
        hits = []
        for x in visited:
            k = next((k for k, (y, alpha) in enumerate(zip(path.worlds, path.labels))
                      if ck.same_class(alpha, y, x)), None)
            if k is None or (hits and k < hits[-1]):
                raise PostconditionFailed("Pushed worlds out of order on a short path",
                                          witness={"path": path.to_list(), "worlds": list(visited)})
            hits.append(k)


def push_away(ck, w, v, zs, z0, m, transcript=None, audit=False):
    """
    Bisimilar v* in [v]_agt(z0, v) with d_t(zs, v*) > m and d_t(w, v*) > m,
    keeping agt to w and to every z in zs.

    Each round walks v_1, v_2, ... along agents a_n outside short_t(v_(n-1), w),
    shrinking gamma_n until d_t(w, v_n) grows; rounds repeat until it exceeds m.
    With ``audit`` every step also checks that v_0..v_n lie in order on all
    short inner non-t paths from w to v_n, which enumerates those paths.

    Raises:
        HypothesisViolated: When the starting configuration does not qualify.
        NoCandidate: When richness runs out for some a_n.
        PostconditionFailed: When a recorded property or the final distances fail.
    """
    table = agt_table(ck)
    zs = [z for z in zs]
    gamma = int(table[z0, v])
    if gamma < 0:
        raise HypothesisViolated(f"{z0} and {v} are not connected")
    if gamma & ~int(table[w, v]) or any(gamma & ~int(table[z, v]) for z in zs):
        raise HypothesisViolated("agt(z0, v) must be contained in agt(w, v) and every agt(z, v)")
    t = AvoidSet(v, gamma)
    cap = m + 1
    if t_distance_set(ck, zs, v, t, cap) <= m:
        raise HypothesisViolated(f"d_t(zs, {v}) <= {m}")
    start = v
    transcript = transcript if transcript is not None else []

    d = t_distance(ck, w, v, t, cap) if w != v else 0
    while d <= m:
        if d == 0:
            raise HypothesisViolated("w coincides with v")
        ell = d
        beta0 = short_t(ck, v, w, t, m).coalition or 0
        pending = gamma & ~beta0
        if not pending:
            raise InsufficientAcyclicity("agt(z0, v) lies inside short_t(v, w)",
                                         witness={"world": v})
        chosen = []
        visited = [v]
        while True:
            a = lowest_world(pending)
            nxt = next(_far_candidates(ck, v, 1 << a, w, zs, t, m, cap), None)
            if nxt is None:
                raise NoCandidate(f"No usable bisimilar {ck.agents[a]}-neighbour of {v}",
                                  witness={"agent": a, "world": v})
            v = nxt
            chosen.append(a)
            d = t_distance(ck, w, v, t, cap)
            if d > ell:
                transcript.append(PushStep(v, a, None, pending))
                break
            visited.append(v)
            if audit:
                _audit_order(ck, w, visited, t, m)
            beta = short_t(ck, v, w, t, m).coalition or 0
            if not beta & (1 << a):
                raise PostconditionFailed("Step-away law failed: a_n not in short_t(v_n, w)",
                                          witness={"world": v, "agent": a, "beta": beta})
            if not _check_shape(beta, beta0, chosen):
                raise PostconditionFailed("beta_n has an unexpected shape",
                                          witness={"world": v, "beta": beta, "agents": chosen})
            shrunk = pending & ~beta
            if shrunk == pending:
                raise PostconditionFailed("gamma_n did not shrink", witness={"gamma": pending})
            pending = shrunk
            transcript.append(PushStep(v, a, beta, pending))
            if not pending:
                break
        if d <= ell:
            raise PostconditionFailed(f"Round ended at {v} with d_t(w, v) = {d} <= {ell}",
                                      witness={"world": v, "distance": d})

    if not ck.same_class(gamma, v, start) or not _bisimilar(ck, v, start):
        raise PostconditionFailed("Result left [v]_gamma or its bisimulation class", witness={"world": v})
    if t_distance_set(ck, zs, v, t, cap) <= m:
        raise PostconditionFailed(f"d_t(zs, {v}) <= {m} after pushing", witness={"world": v})
    return v


def is_m_free(ck, zs, z0, v, m):
    """Dual distance from the hyperedges of zs to that of v, avoiding their common part with z0, exceeds m."""
    h = dual(ck)
    mine = h.hyperedge(v)
    t = mine & h.hyperedge(z0)
    xs = set()
    for z in zs:
        xs |= h.hyperedge(z)
    return gaifman_distance(h, xs, mine, t) > m


def _adjust_gamma(ck, v, z0, gamma):
    table = agt_table(ck)
    for _ in range(ck.n_agents + 1):
        have = int(table[v, z0])
        if have == gamma:
            return v
        a = lowest_world(gamma & ~have)
        bit = 1 << a
        nxt = next((x for x in ck.members(bit, ck.block(bit, v))
                    if x != v and _bisimilar(ck, x, v) and table[x, z0] == have | bit), None)
        if nxt is None:
            raise NoCandidate(f"No bisimilar {ck.agents[a]}-neighbour of {v} widens agt to z0",
                              witness={"agent": a, "world": v})
        v = nxt
    raise PostconditionFailed("Could not reach the requested agt", witness={"world": v})


def find_free_witness(ck, v, zs, z0, gamma, m, transcript=None):
    """
    Bisimilar v* with agt(v*, z0) = gamma that is m-free from (zs, z0).

    The agt to z0 is widened first, then triangle steps separate the other
    worlds of zs, and finally push_away at m + 1 moves v* far in t-distance.
    Push steps are appended to ``transcript`` when one is given.
    """
    table = agt_table(ck)
    zs = sorted(set(zs))
    if z0 not in zs:
        raise HypothesisViolated(f"Point {z0} is not in the pointed set")
    have = int(table[v, z0])
    if have < 0 or have & ~gamma:
        raise HypothesisViolated(f"gamma must contain agt({v}, {z0})")
    if gamma == 0:
        if _bisimilar(ck, v, z0):
            return z0
        raise NoCandidate("Only z0 has empty agt to z0 and it is not bisimilar", witness={"world": v})

    origin = v
    v = _adjust_gamma(ck, v, z0, gamma)
    order = [z0] + [z for z in zs if z != z0]
    for j in range(1, len(order)):
        v = triangle_step(ck, v, order[j], order[:j], z0)
    for i, z in enumerate(order):
        t = AvoidSet(v, gamma)
        if t_distance(ck, z, v, t, m + 2) <= m + 1:
            v = push_away(ck, z, v, order[:i], z0, m + 1, transcript)

    if not _bisimilar(ck, v, origin) or table[v, z0] != gamma or not is_m_free(ck, zs, z0, v, m):
        raise PostconditionFailed(f"Witness {v} does not satisfy the freeness condition", witness={"world": v})
    return v


def brute_force_witness(ck, v, zs, z0, gamma, m):
    """Lowest bisimilar world with agt gamma to z0 that is m-free, or None."""
    table = agt_table(ck)
    labels = bisimulation_classes(ck)
    for x in range(ck.n_worlds):
        if labels[x] == labels[v] and table[x, z0] == gamma and is_m_free(ck, zs, z0, x, m):
            return x
    return None


@dataclass
class FreeReport:
    ok: bool
    m: int
    k: int
    checked: int = 0
    fallbacks: int = 0
    counterexample: dict = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"ok": self.ok, "m": self.m, "k": self.k, "checked": self.checked,
                "fallbacks": self.fallbacks, "counterexample": self.counterexample,
                "notes": self.notes}


def _supersets(base, full):
    rest = full & ~base
    sub = rest
    out = []
    while True:
        out.append(base | sub)
        if sub == 0:
            break
        sub = (sub - 1) & rest
    return sorted(out)


def _cells_for(ck, v, m, k):
    table = agt_table(ck)
    others = [x for x in range(ck.n_worlds) if x != v and table[v, x] >= 0]
    checked = fallbacks = 0
    for size in range(1, k + 1):
        for zs in combinations(others, size):
            for z0 in zs:
                for gamma in _supersets(int(table[v, z0]), ck.full):
                    checked += 1
                    try:
                        find_free_witness(ck, v, zs, z0, gamma, m)
                        continue
                    except FreenessError as e:
                        logging.debug(f"Witness search failed at v={v}, zs={zs}: {e}")
                    fallbacks += 1
                    if brute_force_witness(ck, v, zs, z0, gamma, m) is None:
                        cell = {"v": v, "zs": list(zs), "z0": z0, "gamma": gamma}
                        return checked, fallbacks, cell
    return checked, fallbacks, None


def check_mk_free(ck, m, k, threads=None):
    """
    Exhaustive (m, k)-freeness check over v, pointed sets of size <= k
    avoiding v, and every gamma containing agt(v, z0).

    m <= 0 and k = 0 hold vacuously.
    """
    report = FreeReport(True, m, k)
    if m <= 0 or k <= 0:
        report.notes.append("vacuous")
        return report
    if not check_2acyclic_char(ck):
        report.ok = False
        report.notes.append("not 2-acyclic")
        return report
    agt_table(ck)
    bisimulation_classes(ck)
    dual(ck).gaifman
    with ThreadPoolExecutor(max_workers=config.worker_count(threads)) as pool:
        results = list(pool.map(lambda v: _cells_for(ck, v, m, k), range(ck.n_worlds)))
    for checked, fallbacks, cell in results:
        report.checked += checked
        report.fallbacks += fallbacks
        if cell is not None and report.counterexample is None:
            report.ok = False
            report.counterexample = cell
    logging.info(f"({m},{k})-freeness: {report.checked} cells, {report.fallbacks} fallbacks, ok={report.ok}")
    return report
