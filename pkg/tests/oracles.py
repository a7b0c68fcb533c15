"""Slow, obviously-correct reference implementations used by the tests.

Nothing here shares code with the package beyond its data types.
"""

import math
from collections import defaultdict
from fractions import Fraction

import networkx as nx


def entropy_of(masses):
    return -sum(p * math.log2(p) for p in masses if p > 0)


def coarse_masses(cells, weights, shift):
    out = defaultdict(float)
    for c, w in zip(cells, weights):
        out[int(c) >> shift] += float(w)
    return dict(out)


def convolve_dict(a: dict, b: dict) -> dict:
    out = defaultdict(lambda: 0)
    for x, p in a.items():
        for y, q in b.items():
            out[x + y] += p * q
    return dict(out)


def frostman_flow(cells, level, tau):
    """Maximal mass under mu(I) <= |I|^tau, as a max flow on the dyadic tree."""
    G = nx.DiGraph()
    for k in cells:
        k = int(k)
        for lvl in range(level, 0, -1):
            parent = (lvl - 1, k >> 1)
            G.add_edge(parent, (lvl, k), capacity=2.0 ** (-lvl * tau))
            k >>= 1
        G.add_edge("source", (0, k), capacity=1.0)
    for k in cells:
        G.add_edge((level, int(k)), "sink")  # no capacity attribute: unbounded
    return nx.maximum_flow_value(G, "source", "sink")


def multiplicity_brute(cells, level, theta: Fraction, x, r, R):
    """Rows of level-r cells met by the fiber of x inside the window ball.

    Works with exact rationals and plain loops: a level-r cell [a, a+1) x [b, b+1)
    (in units 2^-r) meets the line u + theta v = t when t lies in
    [a + theta b, a + 1 + theta (b + 1)) 2^-r.
    """
    thick = {(i >> (level - r), j >> (level - r)) for i, j in cells}
    t = Fraction(x[0], 2**level) + theta * Fraction(x[1], 2**level)
    unit = Fraction(1, 2**r)
    rows = set()
    for a, b in thick:
        if R is not None:
            ha, hb = a >> (r - R), b >> (r - R)
            xa, xb = x[0] >> (level - R), x[1] >> (level - R)
            if abs(ha - xa) > 1 or abs(hb - xb) > 1:
                continue
        low = (a + theta * b) * unit
        high = (a + 1 + theta * (b + 1)) * unit
        if low <= t < high:
            rows.add(b)
    return len(rows)


def covering_brute(points, level):
    return len({math.floor(p * 2**level) for p in points})
