"""Independent reference implementations used as test oracles.

Each function re-derives a quantity by brute force or by the textbook
definition, without importing the code under test.
"""

from __future__ import annotations

import itertools
import math


def type7_quantile(values, p):
    """Hyndman-Fan type 7 on a plain sorted list."""
    s = sorted(values)
    h = (len(s) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def iqr_outliers(column, multiplier):
    """Row indices outside [Q1 - m*IQR, Q3 + m*IQR]; none if IQR is 0."""
    q1, q3 = type7_quantile(column, 0.25), type7_quantile(column, 0.75)
    iqr = q3 - q1
    if iqr <= 0:
        return []
    lo, hi = q1 - multiplier * iqr, q3 + multiplier * iqr
    return [i for i, v in enumerate(column) if v < lo or v > hi]


def weighted_hamming(F, G, W):
    num = sum(w for f, g, w in zip(F, G, W) if f != g)
    return 1.0 - num / sum(W)


def best_of_pick_expectation(records, pick):
    """Enumerate all n**pick ordered draws with replacement."""
    n = len(records)
    total = 0.0
    for draw in itertools.product(range(n), repeat=pick):
        best = draw[0]
        for i in draw[1:]:
            if records[i][0] < records[best][0] or (records[i][0] == records[best][0] and i < best):
                best = i
        total += records[best][1]
    return total / n**pick


def best_of_pick_variance(records, pick):
    n = len(records)
    mean = best_of_pick_expectation(records, pick)
    total = 0.0
    for draw in itertools.product(range(n), repeat=pick):
        best = min(draw, key=lambda i: (records[i][0], i))
        total += (records[best][1] - mean) ** 2
    return total / n**pick


def complete_linkage_heights(D):
    """Naive complete linkage returning the merge heights in order."""
    clusters = [[i] for i in range(len(D))]
    heights = []
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = max(D[i][j] for i in clusters[a] for j in clusters[b])
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        merged = clusters[a] + clusters[b]
        clusters = [c for k, c in enumerate(clusters) if k not in (a, b)] + [merged]
        heights.append(d)
    return heights


def normal_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def normal_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def expected_improvement(mu, sigma, best):
    sigma = max(sigma, 1e-6)
    z = (best - mu) / sigma
    return (best - mu) * normal_cdf(z) + sigma * normal_pdf(z)


def has_cycle(nodes, arcs):
    """Exhaustive path enumeration: a cycle exists iff some simple path
    from a node can return to it."""
    succ = {n: [b for a, b in arcs if a == n] for n in nodes}

    def reach(start, node, seen):
        for nxt in succ[node]:
            if nxt == start:
                return True
            if nxt not in seen and reach(start, nxt, seen | {nxt}):
                return True
        return False

    return any(reach(n, n, {n}) for n in nodes)


def stratified_split_exists(class_counts, fraction):
    """A stratified split puts at least one row of every class on both
    sides and needs at least two classes."""
    present = [c for c in class_counts if c > 0]
    if len(present) < 2:
        return False
    return all(c >= 2 for c in present)


def geometric_mean_trials(p):
    return 1.0 / p
