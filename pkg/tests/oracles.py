"""Brute-force reference implementations, independent of the library code."""

from itertools import product

import numpy as np


def reachability_labels(partitions, agents):
    """Floyd-Warshall closure of the union of the listed agent partitions; class = least reachable world."""
    n = partitions.shape[1]
    reach = [[i == j for j in range(n)] for i in range(n)]
    for a in agents:
        for i in range(n):
            for j in range(n):
                if partitions[a][i] == partitions[a][j]:
                    reach[i][j] = True
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if reach[i][k] and reach[k][j]:
                    reach[i][j] = True
    return [min(j for j in range(n) if reach[i][j]) for i in range(n)]


def same_partition(a, b):
    """Whether two label sequences induce the same partition."""
    a, b = list(a), list(b)
    return all((a[i] == a[j]) == (b[i] == b[j]) for i in range(len(a)) for j in range(len(a)))


def coalition_relations(partitions):
    """Relation per coalition mask as a set of pairs, via reachability."""
    k, n = partitions.shape
    out = {}
    for alpha in range(1 << k):
        labels = reachability_labels(partitions, [a for a in range(k) if alpha >> a & 1])
        out[alpha] = {(i, j) for i in range(n) for j in range(n) if labels[i] == labels[j]}
    return out


def naive_bisimulation(m, n):
    """Greatest fixpoint over world pairs on the coalition relations of both structures."""
    rel_m, rel_n = coalition_relations(m.partitions), coalition_relations(n.partitions)
    pairs = {(w, v) for w in range(m.n_worlds) for v in range(n.n_worlds)
             if np.array_equal(m.valuation[:, w], n.valuation[:, v])}
    changed = True
    while changed:
        changed = False
        for w, v in sorted(pairs):
            ok = True
            for alpha in rel_m:
                forth = all(any((x, y) in pairs for y in range(n.n_worlds) if (v, y) in rel_n[alpha])
                            for x in range(m.n_worlds) if (w, x) in rel_m[alpha])
                back = all(any((x, y) in pairs for x in range(m.n_worlds) if (w, x) in rel_m[alpha])
                           for y in range(n.n_worlds) if (v, y) in rel_n[alpha])
                if not (forth and back):
                    ok = False
                    break
            if not ok:
                pairs.discard((w, v))
                changed = True
    return pairs


def bounded_bisimilar(m, w, n, v, ell):
    """Bisimulation game of ell rounds by plain recursion."""
    rel_m, rel_n = coalition_relations(m.partitions), coalition_relations(n.partitions)

    def play(w, v, rounds):
        if not np.array_equal(m.valuation[:, w], n.valuation[:, v]):
            return False
        if rounds == 0:
            return True
        for alpha in rel_m:
            for x in range(m.n_worlds):
                if (w, x) in rel_m[alpha] and not any(
                        play(x, y, rounds - 1) for y in range(n.n_worlds) if (v, y) in rel_n[alpha]):
                    return False
            for y in range(n.n_worlds):
                if (v, y) in rel_n[alpha] and not any(
                        play(x, y, rounds - 1) for x in range(m.n_worlds) if (w, x) in rel_m[alpha]):
                    return False
        return True

    return play(w, v, ell)


def fo_game(rel_m, val_m, rel_n, val_n, pebbles, rounds):
    """Plain minimax for the first-order game; pebbles is a list of (x, y)."""
    def partial_iso(peb):
        for (x1, y1), (x2, y2) in product(peb, repeat=2):
            if (x1 == x2) != (y1 == y2):
                return False
            for alpha in rel_m:
                if ((x1, x2) in rel_m[alpha]) != ((y1, y2) in rel_n[alpha]):
                    return False
        return all(val_m[x] == val_n[y] for x, y in peb)

    if not partial_iso(pebbles):
        return False
    if rounds == 0:
        return True
    n_m, n_n = len(val_m), len(val_n)
    for x in range(n_m):
        if not any(fo_game(rel_m, val_m, rel_n, val_n, pebbles + [(x, y)], rounds - 1) for y in range(n_n)):
            return False
    for y in range(n_n):
        if not any(fo_game(rel_m, val_m, rel_n, val_n, pebbles + [(x, y)], rounds - 1) for x in range(n_m)):
            return False
    return True


def fo_equivalent(m, w, n, v, q):
    val_m = [tuple(m.valuation[:, x]) for x in range(m.n_worlds)]
    val_n = [tuple(n.valuation[:, y]) for y in range(n.n_worlds)]
    return fo_game(coalition_relations(m.partitions), val_m, coalition_relations(n.partitions), val_n,
                   [(w, v)], q)
