"""
Ehrenfeucht-Fraisse games between pointed CK structures.

The Duplicator engine keeps the round invariant: closed vertex sets Q, Q'
in the two dual hypergraphs, one tree shared by their decompositions, and
the world maps of its nodes (their pairs form sigma). Spoiler's fresh
worlds are copied to the other side node by node, breadth first, using
the tree formulas to find bisimilar candidates and the freeness search to
place them far from everything already matched.

Sides are 0 (left, M) and 1 (right, N) internally; moves accept the names.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np

from libs import config
from libs.acyclicity import acyclicity_level, agt_table, check_2acyclic_char, require_2acyclic
from libs.bisim import bisimulation_classes, l_bisimilar, lbisim_classes, refinement_levels
from libs.cayley import richness_level
from libs.errors import (
    DanglingWorldId,
    FreenessError,
    FreenessUnavailable,
    GameError,
    GatesFailed,
    InvariantBroken,
    Not2Acyclic,
    NotAcyclic,
    NotConnectedTree,
    SameWorld,
)
from libs.formula import (
    Diamond,
    FormulaTable,
    characteristic_formula,
    conjunction,
    disjunction,
    fo_eval,
    free_vars,
    quantifier_rank,
    random_fo_formula,
    satisfaction,
)
from libs.freeness import find_free_witness
from libs.hypergraph import Hypergraph, JoinTree, cl_m, dual, is_closed, join_tree, measure_f, restrict, verify_join_tree
from libs.kripke import CKStructure, check_signature, ck_expand, disjoint_union, format_coalition

__all__ = [
    'SIDES', 'Schedules', 'EFGame', 'GameInvariant', 'ReplayReport', 'UpgradeReport',
    'SurrogateReport', 'make_schedules', 'measured_f_hat', 'build_phi_T', 'initial_invariant',
    'duplicator_round', 'check_invariant', 'require_invariant', 'invariant_digest',
    'fo_ef_oracle', 'replay_spoiler', 'gate_report', 'upgrade_experiment',
    'sentence_pool', 'main_theorem_surrogate',
]

SIDES = ("left", "right")


def _ck(m):
    return m if isinstance(m, CKStructure) else ck_expand(m)


def _side_index(side):
    if side in (0, 1):
        return int(side)
    if side in SIDES:
        return SIDES.index(side)
    raise ValueError(f"Unknown side {side!r}")


# ---- Schedules ----

@dataclass(frozen=True)
class Schedules:
    """
    Closure radii and bisimulation depths, stored from round q down to round 0.

    Attributes:
        m (tuple): m_q, ..., m_0.
        ell (tuple): ell_q, ..., ell_0.
        f_hat (tuple): (m_i, k, value) for every closure bound that was used.
    """
    q: int
    m: tuple
    ell: tuple
    f_hat: tuple = ()

    def m_at(self, i):
        return self.m[self.q - i]

    def ell_at(self, i):
        return self.ell[self.q - i]

    def to_dict(self):
        return {
            "q": self.q,
            "m": list(self.m),
            "ell": list(self.ell),
            "f_hat": [{"m": m, "k": k, "value": v} for m, k, v in self.f_hat],
        }


def make_schedules(q, f_hat, tau_size=0):
    """
    m_q = 2, m_(i-1) = 2 m_i + 1; ell_q = 1, ell_(i-1) = ell_i + f_hat(m_i, tau_size + 1).

    Args:
        q (int): Number of rounds, at least 1.
        f_hat (int | callable): Closure bound, constant or f(m, k).
        tau_size (int): Number of coalitions.
    """
    if q < 1:
        raise ValueError("Schedules need at least one round")
    k = tau_size + 1
    bound = f_hat if callable(f_hat) else (lambda m, k, value=int(f_hat): value)
    m = [2]
    ell = [1]
    used = []
    for _ in range(q):
        value = int(bound(m[-1], k))
        used.append((m[-1], k, value))
        ell.append(ell[-1] + value)
        m.append(2 * m[-1] + 1)
    return Schedules(q, tuple(m), tuple(ell), tuple(used))


def measured_f_hat(h_left, h_right, safety=None, samples=None, seed=None):
    """Closure bound measured on both duals, times the safety factor; memoized per (m, k)."""
    safety = config.F_HAT_SAFETY if safety is None else safety
    cache = {}

    def f_hat(m, k):
        if (m, k) not in cache:
            size = max(measure_f(h, m, k, samples, seed) for h in (h_left, h_right))
            cache[(m, k)] = safety * size
            logging.info(f"Measured closure bound f({m}, {k}) = {size}, using {cache[(m, k)]}.")
        return cache[(m, k)]
    return f_hat


# ---- Tree formulas ----

def _phi(ck, children, worlds, labels, u, ell, table, memo):
    if u not in memo:
        parts = [characteristic_formula(ck, worlds[u], ell, table)]
        for c in children.get(u, ()):
            sub = _phi(ck, children, worlds, labels, c, ell, table, memo)
            parts.append(table.make(Diamond, labels[c], sub))
        memo[u] = conjunction(parts, table)
    return memo[u]


def build_phi_T(ck, parent, worlds, root, ell, table=None):
    """
    Formula describing a world-labelled tree from its root.

    Each node contributes the depth-ell characteristic formula of its world
    and a diamond over agt(parent world, child world) for every child.

    Args:
        parent (list): Parent node per node, -1 at the root.
        worlds (list): World per node.

    Raises:
        NotConnectedTree: If the parent list is not a tree rooted at ``root``.
    """
    ck = _ck(ck)
    n = len(parent)
    if len(worlds) != n or not 0 <= root < n or parent[root] != -1:
        raise NotConnectedTree(f"Node {root} is not the root of the skeleton")
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from((u, p) for u, p in enumerate(parent) if p >= 0)
    if not nx.is_tree(g) or sum(1 for p in parent if p < 0) != 1:
        raise NotConnectedTree("Parent list does not form a tree")
    table = table if table is not None else FormulaTable()
    agt = agt_table(ck)
    children = {}
    labels = [None] * n
    for u, p in enumerate(parent):
        if p >= 0:
            children.setdefault(p, []).append(u)
            labels[u] = int(agt[worlds[p], worlds[u]])
    return _phi(ck, children, worlds, labels, root, ell, table, {})


# ---- Game state ----

def _verified_acyclicity(ck, need):
    cap = need if getattr(ck, "truncated", None) is not None else min(need, config.CYCLE_CAP)
    return acyclicity_level(ck, cap)


class EFGame:
    """
    The two pointed structures of a game with their duals, schedules and ∼^ell labels.

    Attributes:
        out_of_warranty (bool): Verified acyclicity of a side is below 2 m_1 + 1.
    """

    def __init__(self, left, w0, right, v0, schedules):
        left, right = _ck(left), _ck(right)
        check_signature(left.base, right.base)
        self.cks = (left, right)
        self.points = (int(w0), int(v0))
        for side, (ck, w) in enumerate(zip(self.cks, self.points)):
            if not 0 <= w < ck.n_worlds:
                raise DanglingWorldId(w, ck.n_worlds)
            try:
                require_2acyclic(ck)
            except Not2Acyclic as e:
                raise InvariantBroken("2-acyclic", {"side": SIDES[side], **e.witness}) from e
        self.schedules = schedules
        self.duals = (dual(left), dual(right))
        self.levels, self.shift = lbisim_classes(left, right, schedules.ell_at(0))
        self.table = FormulaTable()
        self.need = 2 * schedules.m_at(1) + 1
        self.acyclicity = tuple(_verified_acyclicity(ck, self.need) for ck in self.cks)
        self.out_of_warranty = min(self.acyclicity) < self.need
        if self.out_of_warranty:
            logging.warning(f"Game runs out of warranty: verified acyclicity {self.acyclicity}, "
                            f"wanted {self.need}.")

    def warranty(self):
        return {"acyclicity": list(self.acyclicity), "needed": self.need,
                "out_of_warranty": self.out_of_warranty}


@dataclass(frozen=True)
class GameInvariant:
    """
    Position of the game after ``round`` rounds.

    Node u of the shared tree carries worlds[side][u], bags[side][u] and the
    coalition labels[u] = agt(parent world, world); q_sets[side] is the union
    of the bags of that side.
    """
    game: EFGame
    round: int
    worlds: tuple
    bags: tuple
    parent: tuple
    labels: tuple
    q_sets: tuple
    pebbles: tuple
    response: int = None

    @property
    def m(self):
        return self.game.schedules.m_at(self.round)

    @property
    def ell(self):
        return self.game.schedules.ell_at(self.round)

    @property
    def sigma(self):
        return dict(zip(self.worlds[0], self.worlds[1]))


def initial_invariant(game):
    h0, h1 = game.duals
    w0, v0 = game.points
    bags = (frozenset([h0.coset_vertex(w0, 0)]), frozenset([h1.coset_vertex(v0, 0)]))
    inv = GameInvariant(
        game=game, round=0, worlds=((w0,), (v0,)), bags=((bags[0],), (bags[1],)),
        parent=(-1,), labels=(None,), q_sets=bags, pebbles=((w0, v0),),
    )
    require_invariant(inv)
    return inv


# ---- Invariant bullets ----

def _relation_profile(ck, worlds):
    idx = np.asarray(worlds, dtype=np.int64)
    cls = ck.blocks[:, idx]
    return ck.atom_codes[idx], cls[:, :, None] == cls[:, None, :]


def _iso_witness(inv):
    left, right = inv.game.cks
    atoms_l, same_l = _relation_profile(left, inv.worlds[0])
    atoms_r, same_r = _relation_profile(right, inv.worlds[1])
    bad = np.flatnonzero(atoms_l != atoms_r)
    if len(bad):
        u = int(bad[0])
        return {"node": u, "atoms": True}
    bad = np.argwhere(same_l != same_r)
    if len(bad):
        alpha, u, v = (int(x) for x in bad[0])
        return {"coalition": alpha, "nodes": [u, v]}
    return None


def _bag_witness(inv):
    h0, h1 = inv.game.duals
    image = {}
    for u in range(len(inv.parent)):
        for side, h in enumerate(inv.game.duals):
            if not inv.bags[side][u] <= h.hyperedge(inv.worlds[side][u]):
                return {"side": SIDES[side], "node": u}
        partners = set()
        for x in inv.bags[0][u]:
            y = h1.coset_vertex(inv.worlds[1][u], h0.colours[x])
            if image.setdefault(x, y) != y:
                return {"node": u, "vertex": x}
            partners.add(y)
        if partners != set(inv.bags[1][u]):
            return {"node": u, "partners": sorted(partners ^ set(inv.bags[1][u]))}
    if len(set(image.values())) != len(image):
        return {"injective": False}
    for side in (0, 1):
        if frozenset().union(*inv.bags[side]) != inv.q_sets[side]:
            return {"side": SIDES[side], "union": False}
    return None


def _decomposition_witness(inv):
    for side, h in enumerate(inv.game.duals):
        tree = JoinTree(list(inv.bags[side]), list(inv.parent))
        if not verify_join_tree(tree):
            return {"side": SIDES[side], "running_intersection": False}
        for e in restrict(h, inv.q_sets[side]).edges:
            if not any(e <= bag for bag in inv.bags[side]):
                return {"side": SIDES[side], "uncovered": sorted(e)}
    return None


def check_invariant(inv):
    """
    Evaluate every invariant bullet.

    Returns:
        list: (bullet, witness) pairs for the failed bullets, in a fixed order.
    """
    game = inv.game
    failures = []
    nodes = set(zip(inv.worlds[0], inv.worlds[1]))
    missing = [list(p) for p in inv.pebbles if p not in nodes]
    if missing:
        failures.append(("pebbles", {"unmatched": missing}))
    witness = _iso_witness(inv)
    if witness is not None:
        failures.append(("isomorphism", witness))
    labels = game.levels[inv.ell]
    for u, (w, v) in enumerate(zip(*inv.worlds)):
        if labels[w] != labels[game.shift + v]:
            failures.append(("bisimilar", {"node": u, "worlds": [w, v], "depth": inv.ell}))
            break
    witness = _bag_witness(inv)
    if witness is not None:
        failures.append(("bags", witness))
    witness = _decomposition_witness(inv)
    if witness is not None:
        failures.append(("decomposition", witness))
    for side, h in enumerate(game.duals):
        if not is_closed(h, inv.q_sets[side], inv.m):
            failures.append(("closed", {"side": SIDES[side], "m": inv.m}))
    return failures


def require_invariant(inv):
    failures = check_invariant(inv)
    if failures:
        bullet, witness = failures[0]
        logging.error(f"Invariant bullet {bullet!r} fails after round {inv.round}: {witness}")
        raise InvariantBroken(bullet, witness)


# ---- Duplicator ----

def _piece(h, area, region, world):
    """
    Maximal traces of the hyperedges on ``area`` with their worlds, as a join
    tree listed breadth first from a bag containing ``region``.
    """
    traces = {}
    for x in range(h.ck.n_worlds):
        trace = h.hyperedge(x) & area
        if trace:
            traces.setdefault(trace, []).append(x)
    maximal = [e for e in traces if not any(e < f for f in traces)]
    maximal.sort(key=sorted)
    piece = Hypergraph(area, maximal, witnesses=[traces[e] for e in maximal])
    try:
        tree = join_tree(piece)
    except NotAcyclic as e:
        raise InvariantBroken("decomposition", {"remainder": e.remainder}) from e
    root = next((j for j, bag in enumerate(tree.bags) if region <= bag), None)
    if root is None:
        raise InvariantBroken("clique", {"region": sorted(region), "world": world})
    order = [(root, None)] + [(child, up) for up, child in nx.bfs_edges(tree.graph(), root)]
    return tree, order


def _partners(h, h_other, bag, world):
    return frozenset(h_other.coset_vertex(world, h.colours[x]) for x in bag)


def _extend(inv, s, world, m, ell):
    game = inv.game
    o = 1 - s
    h, h_o = game.duals[s], game.duals[o]
    ck, ck_o = game.cks[s], game.cks[o]
    worlds = [list(inv.worlds[0]), list(inv.worlds[1])]
    bags = [list(inv.bags[0]), list(inv.bags[1])]
    parent, labels = list(inv.parent), list(inv.labels)

    q_old = inv.q_sets[s]
    q_new = cl_m(h, q_old | {h.coset_vertex(world, 0)}, m)
    fresh = q_new - q_old
    adj = h.gaifman.adj
    region = frozenset(x for x in q_old if any(u in fresh for u in adj[x]))
    lam = next((u for u, bag in enumerate(bags[s]) if region <= bag), None)
    if lam is None:
        raise InvariantBroken("clique", {"side": SIDES[s], "region": sorted(region)})
    tree, order = _piece(h, fresh | region, region, world)

    agt = agt_table(ck)
    known = {w: u for u, w in enumerate(worlds[s])}
    node_of = {}
    added = []
    for j, up in order:
        bag = tree.bags[j]
        anchor = lam if up is None else node_of[up]
        if bag <= region:
            node_of[j] = anchor
            continue
        old = sorted(known[x] for x in tree.witnesses[j] if x in known)
        if old:
            u = old[0]
            if anchor in added:
                raise InvariantBroken("extension", {"side": SIDES[s], "node": u, "below": anchor})
            bags[s][u] = bags[s][u] | bag
            bags[o][u] = bags[o][u] | _partners(h, h_o, bag, worlds[o][u])
        else:
            wit = tree.witnesses[j]
            x = world if world in wit else min(wit)
            if agt[worlds[s][anchor], x] < 0:
                raise InvariantBroken("connected", {"side": SIDES[s], "worlds": [worlds[s][anchor], x]})
            u = len(parent)
            worlds[s].append(x)
            worlds[o].append(None)
            bags[s].append(bag)
            bags[o].append(None)
            parent.append(anchor)
            labels.append(int(agt[worlds[s][anchor], x]))
            known[x] = u
            added.append(u)
        node_of[j] = u

    children = {}
    for u in added:
        children.setdefault(parent[u], []).append(u)
    memo = {}
    for u in added:
        phi = _phi(ck, children, worlds[s], labels, u, ell, game.table, memo)
        p, alpha = parent[u], labels[u]
        vp = worlds[o][p]
        truth = satisfaction(ck_o, phi)
        cands = [x for x in ck_o.members(alpha, ck_o.block(alpha, vp)) if truth[x]]
        if not cands:
            raise InvariantBroken("transfer", {"side": SIDES[o], "node": u, "parent_world": vp})
        zs = sorted(set(w for w in worlds[o] if w is not None))
        try:
            vu = find_free_witness(ck_o, cands[0], zs, vp, alpha, m)
        except (FreenessError, SameWorld) as e:
            logging.error(f"No free copy for node {u} on the {SIDES[o]}: {e}")
            raise FreenessUnavailable(e) from e
        worlds[o][u] = vu
        bags[o][u] = _partners(h, h_o, bags[s][u], vu)

    response = worlds[o][known[world]]
    q_sets = [None, None]
    q_sets[s] = q_new
    q_sets[o] = frozenset().union(*bags[o])
    logging.debug(f"Round {inv.round + 1}: {len(added)} nodes added, closure {len(q_old)} -> {len(q_new)}.")
    return GameInvariant(
        game=game, round=inv.round + 1, worlds=(tuple(worlds[0]), tuple(worlds[1])),
        bags=(tuple(bags[0]), tuple(bags[1])), parent=tuple(parent), labels=tuple(labels),
        q_sets=tuple(q_sets), pebbles=inv.pebbles, response=response,
    )


def duplicator_round(inv, spoiler_move):
    """
    Answer one Spoiler move and return the invariant of the next round.

    Args:
        spoiler_move (tuple): (side, world), side "left"/"right" or 0/1.

    Raises:
        InvariantBroken: With the first failed bullet and its witness.
        FreenessUnavailable: When a free copy cannot be found.
    """
    side, world = spoiler_move
    s = _side_index(side)
    game = inv.game
    i = inv.round + 1
    if i > game.schedules.q:
        raise GameError(f"All {game.schedules.q} rounds have been played")
    ck = game.cks[s]
    if not 0 <= world < ck.n_worlds:
        raise DanglingWorldId(world, ck.n_worlds)
    if world in inv.worlds[s]:
        u = inv.worlds[s].index(world)
        nxt = replace(inv, round=i, response=inv.worlds[1 - s][u])
    else:
        nxt = _extend(inv, s, world, game.schedules.m_at(i), game.schedules.ell_at(i))
    pair = (world, nxt.response) if s == 0 else (nxt.response, world)
    nxt = replace(nxt, pebbles=inv.pebbles + (pair,))
    require_invariant(nxt)
    return nxt


def invariant_digest(inv):
    """JSON-ready summary of a position."""
    agents = inv.game.cks[0].agents
    return {
        "round": inv.round,
        "m": inv.m,
        "ell": inv.ell,
        "pebbles": [list(p) for p in inv.pebbles],
        "nodes": [
            {"left": w, "right": v, "parent": p,
             "label": None if a is None else format_coalition(a, agents)}
            for w, v, p, a in zip(inv.worlds[0], inv.worlds[1], inv.parent, inv.labels)
        ],
        "closure_sizes": [len(inv.q_sets[0]), len(inv.q_sets[1])],
    }


# ---- First-order oracle ----

class _EFSolver:
    """Minimax over pebble positions; a position is the sorted set of pebbled pairs."""

    def __init__(self, left, right):
        self.cks = (left, right)
        self.memo = {}
        self.refutations = {}

    def profiles(self, side, pebbles):
        """Atomic type and relation pattern to every pebble, one row per world."""
        ck = self.cks[side]
        cols = [ck.atom_codes[:, None]]
        if pebbles:
            p = np.asarray(pebbles, dtype=np.int64)
            same = ck.blocks[:, :, None] == ck.blocks[:, p][:, None, :]
            cols.append(same.transpose(1, 0, 2).reshape(ck.n_worlds, -1).astype(np.int64))
        return np.concatenate(cols, axis=1)

    def wins(self, pairs, rounds):
        key = (pairs, rounds)
        if key not in self.memo:
            self.memo[key] = rounds == 0 or self._answers(pairs, rounds)
        return self.memo[key]

    def _answers(self, pairs, rounds):
        rows = (self.profiles(0, [x for x, _ in pairs]), self.profiles(1, [y for _, y in pairs]))
        for side in (0, 1):
            mine, theirs = rows[side], rows[1 - side]
            if rounds == 1:
                have = {r.tobytes() for r in theirs}
                x = next((x for x in range(len(mine)) if mine[x].tobytes() not in have), None)
                if x is not None:
                    self.refutations[(pairs, rounds)] = (side, x)
                    return False
                continue
            for x in range(len(mine)):
                partners = np.flatnonzero(np.all(theirs == mine[x], axis=1))
                if not any(self.wins(_with_pair(pairs, side, x, int(y)), rounds - 1) for y in partners):
                    self.refutations[(pairs, rounds)] = (side, x)
                    return False
        return True


def _with_pair(pairs, side, x, y):
    pair = (x, y) if side == 0 else (y, x)
    return tuple(sorted(set(pairs) | {pair}))


def fo_ef_oracle(m, w, n, v, q, strategy=None):
    """
    Whether Duplicator wins the q-round first-order game on (m, w), (n, v).

    Relations are every R_alpha, the propositions and equality. When
    ``strategy`` is a dict and Spoiler wins, it receives Spoiler's first move.
    """
    left, right = _ck(m), _ck(n)
    check_signature(left.base, right.base)
    solver = _EFSolver(left, right)
    if left.atom_codes[w] != right.atom_codes[v]:
        if strategy is not None:
            strategy.update({"reason": "atoms", "side": None, "world": None})
        return False
    pairs = ((int(w), int(v)),)
    result = solver.wins(pairs, q)
    if not result and strategy is not None:
        side, x = solver.refutations[(pairs, q)]
        strategy.update({"reason": "move", "side": SIDES[side], "world": int(x)})
    logging.debug(f"EF oracle q={q}: {len(solver.memo)} positions, duplicator wins={result}")
    return result


# ---- Replays ----

@dataclass
class ReplayReport:
    q: int
    mode: str
    seed: int = None
    runs: int = 0
    survived: int = 0
    errors: Counter = field(default_factory=Counter)
    first_failure: dict = None

    @property
    def ok(self):
        return self.runs == self.survived

    def record(self, line, error):
        self.runs += 1
        self.errors[type(error).__name__] += 1
        if self.first_failure is None:
            self.first_failure = {
                "moves": [[SIDES[_side_index(s)], x] for s, x in line],
                "error": type(error).__name__,
                "bullet": getattr(error, "bullet", None),
            }

    def to_dict(self):
        return {"q": self.q, "mode": self.mode, "seed": self.seed, "runs": self.runs,
                "survived": self.survived, "ok": self.ok, "errors": dict(sorted(self.errors.items())),
                "first_failure": self.first_failure}


def _play(state, moves, line, report):
    try:
        for move in moves:
            state = duplicator_round(state, move)
    except GameError as e:
        report.record(line, e)
        return None
    return state


def replay_spoiler(inv, samples=None, seed=None):
    """
    Play Spoiler against the engine from ``inv`` to the last round.

    Exhaustive over all move sequences for q <= 2, otherwise ``samples``
    random lines drawn with the recorded seed.
    """
    game = inv.game
    q = game.schedules.q
    moves = [(s, x) for s in (0, 1) for x in range(game.cks[s].n_worlds)]

    if q <= 2:
        report = ReplayReport(q, "exhaustive")

        def walk(state, line):
            if state.round == q:
                report.runs += 1
                report.survived += 1
                return
            for move in moves:
                nxt = _play(state, [move], line + [move], report)
                if nxt is not None:
                    walk(nxt, line + [move])

        walk(inv, [])
    else:
        seed = config.DEFAULT_SEED if seed is None else seed
        report = ReplayReport(q, "sampled", seed)
        rng = np.random.default_rng(seed)
        for _ in range(samples or config.REPLAY_SAMPLES):
            line = [moves[int(i)] for i in rng.integers(0, len(moves), size=q - inv.round)]
            if _play(inv, line, line, report) is not None:
                report.runs += 1
                report.survived += 1
    logging.info(f"Spoiler replay ({report.mode}, q={q}): {report.survived}/{report.runs} lines survived.")
    return report


# ---- Upgrade experiment ----

def gate_report(ck, acyclicity=None, richness=None):
    """Acyclicity and richness certificates of one structure with the failed gates."""
    ck = _ck(ck)
    acyclicity = config.GATE_ACYCLICITY if acyclicity is None else acyclicity
    richness = config.GATE_RICHNESS if richness is None else richness
    two = check_2acyclic_char(ck)
    level = acyclicity_level(ck, acyclicity) if acyclicity >= 2 else None
    rich = richness_level(ck)
    failures = []
    if not two:
        failures.append("not 2-acyclic")
    if level is not None and level < acyclicity:
        failures.append(f"acyclicity {level} < {acyclicity}")
    if richness > 1 and rich < richness:
        failures.append(f"richness {rich} < {richness}")
    return {"two_acyclic": two, "acyclicity": level, "richness": rich, "failures": failures}


@dataclass
class UpgradeReport:
    q: int
    gates: dict
    schedules: Schedules = None
    ell: int = None
    bisimilar: bool = None
    oracle: bool = None
    refutation: dict = None
    warranty: dict = None
    initial: dict = None
    replay: ReplayReport = None
    engine_error: dict = None

    @property
    def consistent(self):
        """∼^ell implies ≡_q on this pair."""
        return not self.bisimilar or bool(self.oracle)

    @property
    def ok(self):
        return self.consistent and self.engine_error is None and (self.replay is None or self.replay.ok)

    def to_dict(self):
        return {
            "q": self.q,
            "gates": self.gates,
            "schedules": self.schedules.to_dict() if self.schedules else None,
            "ell": self.ell,
            "bisimilar": self.bisimilar,
            "oracle": self.oracle,
            "refutation": self.refutation,
            "warranty": self.warranty,
            "initial": self.initial,
            "replay": self.replay.to_dict() if self.replay else None,
            "engine_error": self.engine_error,
            "consistent": self.consistent,
            "ok": self.ok,
        }


def upgrade_experiment(m, w, n, v, q, acyclicity=None, richness=None, replay=True, samples=None, seed=None):
    """
    Upgrade ∼^ell to ≡_q on one gated pair.

    ell is ell_0 of the schedules built from closure bounds measured on both
    duals. When the pair is ∼^ell, the first-order oracle decides ≡_q and the
    engine is replayed against Spoiler.

    Raises:
        GatesFailed: If either structure misses an acyclicity or richness gate.
    """
    left, right = _ck(m), _ck(n)
    check_signature(left.base, right.base)
    gates = {SIDES[i]: gate_report(ck, acyclicity, richness) for i, ck in enumerate((left, right))}
    failures = [f"{side}: {f}" for side in SIDES for f in gates[side]["failures"]]
    if failures:
        logging.warning(f"Upgrade gates failed: {failures}")
        raise GatesFailed(failures)

    f_hat = measured_f_hat(dual(left), dual(right), seed=seed)
    schedules = make_schedules(q, f_hat, 1 << left.n_agents)
    ell = schedules.ell_at(0)
    report = UpgradeReport(q, gates, schedules, ell)
    report.bisimilar = l_bisimilar(left, w, right, v, ell)
    logging.info(f"Upgrade q={q}: ell={ell}, bisimilar={report.bisimilar}")
    if not report.bisimilar:
        return report

    strategy = {}
    report.oracle = fo_ef_oracle(left, w, right, v, q, strategy)
    if not report.oracle:
        report.refutation = strategy
        logging.error(f"∼^{ell} pair separated by the {q}-round game: {strategy}")
    if replay:
        try:
            game = EFGame(left, w, right, v, schedules)
            report.warranty = game.warranty()
            inv = initial_invariant(game)
            report.initial = invariant_digest(inv)
            report.replay = replay_spoiler(inv, samples, seed)
        except GameError as e:
            report.engine_error = {"error": type(e).__name__, "message": str(e)}
    return report


# ---- Characterisation surrogate ----

def sentence_pool(signature, q, count, seed=None, size=4):
    """Distinct random FO formulas of rank <= q in the single free variable x0."""
    rng = np.random.default_rng(config.DEFAULT_SEED if seed is None else seed)
    n_agents, n_props = len(signature.agents), len(signature.props)
    pool, seen = [], set()
    for _ in range(20 * count):
        if len(pool) == count:
            break
        phi = random_fo_formula(rng, n_agents, n_props, q, (0,), size)
        if phi in seen or quantifier_rank(phi) > q or not free_vars(phi) <= {0}:
            continue
        seen.add(phi)
        pool.append(phi)
    return pool


@dataclass
class SurrogateReport:
    """Finite-corpus check that ∼-invariant sentences are depth-ell modal on the corpus."""
    points: int
    sentences: int
    ell: int
    invariant: int = 0
    agreeing: int = 0
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self):
        return self.invariant == self.agreeing

    def to_dict(self):
        return {"kind": "finite-corpus surrogate", "points": self.points, "sentences": self.sentences,
                "ell": self.ell, "invariant": self.invariant, "agreeing": self.agreeing,
                "counterexamples": self.counterexamples[:20], "ok": self.ok}


def _constant_on(labels, values):
    return all(len(set(values[labels == c])) == 1 for c in np.unique(labels))


def main_theorem_surrogate(points, pool, ell):
    """
    For every pool sentence whose truth is constant on bisimulation classes of
    the points, build the disjunction of depth-ell characteristic formulas of
    its true points and check that it agrees with the sentence on all points.

    Args:
        points (list): (structure, world) pairs over one signature.
        pool (list): FO formulas in the free variable x0.
    """
    structures, slot = [], {}
    for m, _ in points:
        if id(m) not in slot:
            slot[id(m)] = len(structures)
            structures.append(_ck(m))
    offsets, total = [], 0
    union = None
    for ck in structures:
        offsets.append(total)
        total += ck.n_worlds
        union = ck.base if union is None else disjoint_union(union, ck.base)
    union = ck_expand(union)
    ids = np.array([offsets[slot[id(m)]] + w for m, w in points], dtype=np.int64)
    cks = [structures[slot[id(m)]] for m, _ in points]
    full = bisimulation_classes(union)[ids]
    types = refinement_levels(union, ell)[ell][ids]

    report = SurrogateReport(len(points), len(pool), ell)
    table = FormulaTable()
    for k, phi in enumerate(pool):
        values = np.array([fo_eval(ck, {0: w}, phi) for ck, (_, w) in zip(cks, points)], dtype=bool)
        if not _constant_on(full, values):
            continue
        report.invariant += 1
        reps = {}
        for j in np.flatnonzero(values):
            reps.setdefault(int(types[j]), int(ids[j]))
        chars = [characteristic_formula(union, x, ell, table) for _, x in sorted(reps.items())]
        truth = satisfaction(union, disjunction(chars, table))[ids]
        if np.array_equal(truth, values):
            report.agreeing += 1
        else:
            report.counterexamples.append({"sentence": k, "points": [int(j) for j in np.flatnonzero(truth != values)]})
    logging.info(f"Surrogate: {report.agreeing}/{report.invariant} invariant sentences captured at depth {ell}.")
    return report
