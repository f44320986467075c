"""
Hypergraphs and the dual hypergraph of a CK frame.

Vertices are integer ids; the dual keys them by (coalition, class id) so
extent-equal cosets of different coalitions stay distinct. Distances and
paths live in the Gaifman graph, built once per hypergraph with networkx.
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import networkx as nx
import numpy as np

from libs import config
from libs.errors import NotAcyclic, PreconditionClosed, PreconditionDistance
from libs.kripke import format_coalition

__all__ = [
    'Hypergraph', 'DualHypergraph', 'JoinTree', 'AttachResult', 'dual', 'restrict',
    'gaifman_graph', 'gaifman_distance', 'neighbourhood', 'chordless_paths',
    'find_chordless_cycle', 'conformality_witness', 'is_n_conformal', 'is_n_chordal',
    'is_n_acyclic_hg', 'cl_m', 'is_closed', 'attach_region', 'join_tree',
    'verify_join_tree', 'measure_f',
]


class Hypergraph:
    """
    Vertex set plus a list of distinct hyperedges (frozensets of vertex ids).

    Attributes:
        vertices (frozenset): Vertex ids.
        edges (list): Hyperedges.
        colours (dict): Optional colour per vertex.
        witnesses (list): Optional payload per hyperedge.
    """

    def __init__(self, vertices, edges, colours=None, witnesses=None):
        self.vertices = frozenset(vertices)
        self.edges = [frozenset(e) for e in edges]
        self.colours = colours or {}
        self.witnesses = witnesses if witnesses is not None else [None] * len(self.edges)
        self._closures = {}

    @cached_property
    def gaifman(self):
        g = nx.Graph()
        g.add_nodes_from(sorted(self.vertices))
        for e in self.edges:
            g.add_edges_from(combinations(sorted(e), 2))
        return g

    @cached_property
    def incidence(self):
        """Bitmask over hyperedge indices per vertex."""
        inc = dict.fromkeys(self.vertices, 0)
        for i, e in enumerate(self.edges):
            for v in e:
                inc[v] |= 1 << i
        return inc

    def __repr__(self):
        return f"{type(self).__name__}(vertices={len(self.vertices)}, edges={len(self.edges)})"


class DualHypergraph(Hypergraph):
    """Coloured hypergraph of cosets; hyperedge of w is the set of all its cosets."""

    def __init__(self, ck, keys, edges, witnesses, world_edge):
        colours = {i: alpha for i, (alpha, _) in enumerate(keys)}
        super().__init__(range(len(keys)), edges, colours, witnesses)
        self.ck = ck
        self.keys = keys
        self.index = {key: i for i, key in enumerate(keys)}
        self.world_edge = world_edge

    def vertex(self, alpha, cls):
        return self.index[(alpha, cls)]

    def coset_vertex(self, w, alpha):
        return self.index[(alpha, self.ck.block(alpha, w))]

    def hyperedge(self, w):
        return self.edges[self.world_edge[w]]

    def extent(self, v):
        alpha, cls = self.keys[v]
        return set(self.ck.members(alpha, cls))

    def to_dict(self):
        agents = self.ck.agents
        return {
            "vertices": [{"coalition": format_coalition(alpha, agents), "class": cls}
                         for alpha, cls in self.keys],
            "hyperedges": [sorted(e) for e in self.edges],
            "witnesses": [list(ws) for ws in self.witnesses],
        }


def dual(ck):
    """
    Dual hypergraph of a CK frame.

    Vertices are numbered coalition by coalition, classes in id order.
    """
    def build():
        keys = [(alpha, cls) for alpha in ck.coalitions for cls in range(ck.n_classes(alpha))]
        offsets = {}
        pos = 0
        for alpha in ck.coalitions:
            offsets[alpha] = pos
            pos += ck.n_classes(alpha)
        seen = {}
        edges, witnesses = [], []
        world_edge = np.zeros(ck.n_worlds, dtype=np.int64)
        for w in range(ck.n_worlds):
            e = frozenset(offsets[alpha] + int(ck.blocks[alpha, w]) for alpha in ck.coalitions)
            if e not in seen:
                seen[e] = len(edges)
                edges.append(e)
                witnesses.append([])
            witnesses[seen[e]].append(w)
            world_edge[w] = seen[e]
        logging.debug(f"Dual hypergraph: {len(keys)} vertices, {len(edges)} hyperedges.")
        return DualHypergraph(ck, keys, edges, witnesses, world_edge)
    return ck.memo("dual", build)


def restrict(h, Q):
    """Induced sub-hypergraph on Q: non-empty traces of the hyperedges, deduplicated."""
    Q = frozenset(Q)
    seen = {}
    edges, witnesses = [], []
    for e, w in zip(h.edges, h.witnesses):
        trace = e & Q
        if not trace:
            continue
        if trace not in seen:
            seen[trace] = len(edges)
            edges.append(trace)
            witnesses.append(w)
    colours = {v: c for v, c in h.colours.items() if v in Q}
    return Hypergraph(Q, edges, colours, witnesses)


def gaifman_graph(h):
    return h.gaifman


def gaifman_distance(h, X, Y, t=()):
    """
    Distance between X - t and Y - t in the Gaifman graph of the hypergraph induced on A - t.

    Returns:
        int | float: 0 when they meet, ``math.inf`` when disconnected or either side is empty.
    """
    t = set(t)
    xs, ys = set(X) - t, set(Y) - t
    if not xs or not ys:
        return math.inf
    if xs & ys:
        return 0
    g = h.gaifman.subgraph(h.vertices - t) if t else h.gaifman
    dist = nx.multi_source_dijkstra_path_length(g, xs)
    hits = [dist[y] for y in ys if y in dist]
    return int(min(hits)) if hits else math.inf


def neighbourhood(h, P, r):
    """Vertices within Gaifman distance r of P."""
    P = set(P)
    if not P:
        return set()
    return set(nx.multi_source_dijkstra_path_length(h.gaifman, P, cutoff=r))


def chordless_paths(h, a, b, max_len):
    """All chordless paths from a to b with at most max_len edges, as vertex tuples."""
    adj = h.gaifman.adj
    if a == b:
        yield (a,)
        return
    path = [a]

    def extend():
        last = path[-1]
        for u in sorted(adj[last]):
            if u in path or any(u in adj[x] for x in path[:-1]):
                continue
            if u == b:
                yield tuple(path) + (u,)
            elif len(path) < max_len:
                path.append(u)
                yield from extend()
                path.pop()
    yield from extend()


def find_chordless_cycle(h, n):
    """A chordless Gaifman cycle of length 4..n, or None."""
    adj = h.gaifman.adj
    for s in sorted(h.vertices):
        path = [s]

        def extend():
            k = len(path) - 1
            last = path[-1]
            for u in sorted(adj[last]):
                if u <= s or u in path or any(u in adj[x] for x in path[1:-1]):
                    continue
                if k >= 1 and s in adj[u]:
                    if k >= 2 and k + 2 <= n:
                        return tuple(path) + (u,)
                    continue
                if k + 3 <= n:
                    path.append(u)
                    found = extend()
                    path.pop()
                    if found:
                        return found
            return None
        cycle = extend()
        if cycle:
            return cycle
    return None


def conformality_witness(h, n):
    """A Gaifman clique of size 3..n covered by no hyperedge, or None."""
    inc = h.incidence
    for clique in nx.enumerate_all_cliques(h.gaifman):
        if len(clique) > n:
            break
        if len(clique) < 3:
            continue
        bits = -1
        for v in clique:
            bits &= inc[v]
        if bits == 0:
            return tuple(sorted(clique))
    return None


def is_n_conformal(h, n):
    return conformality_witness(h, n) is None


def is_n_chordal(h, n):
    return find_chordless_cycle(h, n) is None


def is_n_acyclic_hg(h, n):
    """n-conformal and n-chordal, for n >= 3."""
    if n < 3:
        raise ValueError("Hypergraph n-acyclicity needs n >= 3")
    return is_n_conformal(h, n) and is_n_chordal(h, n)


def _closure(h, P, m):
    adj = h.gaifman.adj
    Q = set(P)
    work = list(Q)
    while work:
        x = work.pop()
        path = [x]
        found = []

        def extend():
            last = path[-1]
            for u in adj[last]:
                if u in path or any(u in adj[y] for y in path[:-1]):
                    continue
                if u in Q:
                    if len(path) > 1:
                        found.append(path[1:])
                elif len(path) < m:
                    path.append(u)
                    extend()
                    path.pop()
        extend()
        for inner in found:
            for v in inner:
                if v not in Q:
                    Q.add(v)
                    work.append(v)
    return frozenset(Q)


def cl_m(h, P, m):
    """
    Convex m-closure: least superset of P containing every chordless path of
    length <= m between its members.
    """
    if m < 1:
        raise ValueError("Closure radius must be at least 1")
    key = (frozenset(P), m)
    if key not in h._closures:
        h._closures[key] = _closure(h, key[0], m)
    return h._closures[key]


def is_closed(h, P, m):
    return cl_m(h, P, m) == frozenset(P)


AttachResult = namedtuple('AttachResult', ['q_hat', 'region', 'checks'])


def attach_region(h, Q, a, m):
    """
    Extend an m-closed set Q by a nearby vertex and evaluate the attachment laws.

    Returns:
        AttachResult: Q_hat = cl_m(Q | {a}), the region D = Q & N1(Q_hat - Q),
        and checks ``connected``, ``separation``, ``decomposition`` and
        ``clique`` (None unless Q is (2m+1)-closed). Separation is tested for
        paths of length <= m avoiding D.

    Raises:
        PreconditionClosed: If Q is not m-closed.
        PreconditionDistance: Unless 1 <= d(Q, a) <= m.
    """
    Q = frozenset(Q)
    if not is_closed(h, Q, m):
        raise PreconditionClosed(f"Region is not {m}-closed")
    d = gaifman_distance(h, Q, {a})
    if not 1 <= d <= m:
        raise PreconditionDistance(d, m)
    q_hat = cl_m(h, Q | {a}, m)
    fresh = q_hat - Q
    g = h.gaifman
    region = frozenset(v for v in Q if any(u in fresh for u in g.adj[v]))

    rest = g.subgraph(h.vertices - region)
    reach = nx.multi_source_dijkstra_path_length(rest, set(fresh), cutoff=m)
    checks = {
        "connected": nx.is_connected(g.subgraph(fresh)),
        "separation": not any(v in reach for v in Q - region),
        "decomposition": q_hat == Q | cl_m(h, region | {a}, m),
        "clique": None,
    }
    if is_closed(h, Q, 2 * m + 1):
        checks["clique"] = all(v in g.adj[u] for u, v in combinations(sorted(region), 2))
    return AttachResult(q_hat, region, checks)


@dataclass
class JoinTree:
    """Tree over bags; ``parent[i]`` is -1 at the root."""
    bags: list
    parent: list
    witnesses: list = field(default_factory=list)

    def graph(self):
        t = nx.Graph()
        t.add_nodes_from(range(len(self.bags)))
        t.add_edges_from((i, p) for i, p in enumerate(self.parent) if p >= 0)
        return t

    def to_dict(self):
        return {"bags": [sorted(b) for b in self.bags], "parent": list(self.parent)}


def join_tree(h, Q=None):
    """
    Join tree of h (restricted to Q when given) by GYO ear removal.

    Raises:
        NotAcyclic: With the irreducible remainder.
    """
    sub = restrict(h, h.vertices if Q is None else Q)
    bags = list(sub.edges)
    work = [set(b) for b in bags]
    alive = set(range(len(bags)))
    parent = [-1] * len(bags)
    changed = True
    while changed and len(alive) > 1:
        changed = False
        counts = {}
        for i in alive:
            for v in work[i]:
                counts[v] = counts.get(v, 0) + 1
        for i in alive:
            lone = {v for v in work[i] if counts[v] == 1}
            if lone:
                work[i] -= lone
                changed = True
        for i in sorted(alive):
            host = next((j for j in sorted(alive) if j != i and work[i] <= work[j]), None)
            if host is not None:
                parent[i] = host
                alive.discard(i)
                changed = True
                break
    if len(alive) > 1:
        raise NotAcyclic([sorted(work[i]) for i in sorted(alive)])
    return JoinTree(bags, parent, list(sub.witnesses))


def verify_join_tree(tree, h=None):
    """Tree shape, bag coverage of h's hyperedges, and connected occurrence sets."""
    t = tree.graph()
    if len(tree.bags) and not nx.is_tree(t):
        return False
    if h is not None and set(h.edges) - set(tree.bags):
        return False
    occurs = {}
    for i, bag in enumerate(tree.bags):
        for v in bag:
            occurs.setdefault(v, []).append(i)
    return all(nx.is_connected(t.subgraph(nodes)) for nodes in occurs.values())


def measure_f(h, m, k, samples=None, seed=None):
    """
    Largest closure of a vertex set of size <= k.

    Exhaustive while the number of k-subsets stays under the configured bound,
    sampled with a seeded generator beyond it.
    """
    vertices = sorted(h.vertices)
    k = min(k, len(vertices))
    if k <= 0:
        return 0
    total = math.comb(len(vertices), k)
    if total <= config.MEASURE_F_EXHAUSTIVE:
        candidates = combinations(vertices, k)
    else:
        rng = np.random.default_rng(config.DEFAULT_SEED if seed is None else seed)
        count = samples or config.MEASURE_F_SAMPLES
        candidates = (tuple(rng.choice(vertices, size=k, replace=False)) for _ in range(count))
        logging.info(f"measure_f: sampling {count} of {total} sets of size {k}.")
    return max(len(cl_m(h, [int(v) for v in P], m)) for P in candidates)
