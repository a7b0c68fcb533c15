"""Dyadic Hausdorff content at a fixed resolution and maximal Frostman measures.

Both come out of one bottom-up pass over the dyadic tree of the set: the
capacity of a cell is ``min(|I|^tau, sum of children capacities)``.  The
optimal cover keeps the cells where the first term wins; the maximal measure
pushes mass down the tree in proportion to the children capacities.  Cells
longer than one unit are never used, so the tree is a forest of unit cells.

When ``tau = p / q`` has a small denominator the values are exact elements of
Q(2^(1/q)) (see :mod:`fslab.surds`); otherwise floats are used with a
relative comparison guard.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from fslab.dyadic import GridSet1D
from fslab.measures import DeltaMeasure
from fslab.surds import Surd

MAX_EXACT_DENOMINATOR = 64
FLOAT_GUARD = 1e-12


@dataclass(frozen=True)
class ContentValue:
    value: object  # Surd, Fraction or float
    tau: object
    cover: tuple = field(default=())  # (level, index) pairs, sorted by position

    def __float__(self) -> float:
        return float(self.value)


class _ExactArithmetic:
    def __init__(self, tau: Fraction):
        self.p, self.q = tau.numerator, tau.denominator
        self.zero = Surd.zero(self.q)
        self._cache: dict[int, Surd] = {}

    def weight(self, level: int) -> Surd:
        w = self._cache.get(level)
        if w is None:
            w = self._cache[level] = Surd.power(self.q, level * self.p)
        return w

    def prefer_self(self, own, children_total) -> bool:
        return not children_total < own

    def finish(self, value):
        return value.coeffs[0] if value.is_rational() else value


class _FloatArithmetic:
    def __init__(self, tau: float):
        self.tau = float(tau)
        self.zero = 0.0

    def weight(self, level: int) -> float:
        return 2.0 ** (-level * self.tau)

    def prefer_self(self, own, children_total) -> bool:
        return own <= children_total * (1 + FLOAT_GUARD)

    def finish(self, value):
        return float(value)


def _arithmetic(tau, exact: bool | None):
    if isinstance(tau, (int, Fraction)) or (isinstance(tau, float) and tau.is_integer()):
        frac = Fraction(tau)
    elif isinstance(tau, float):
        frac = Fraction(tau)
    elif isinstance(tau, str):
        frac = Fraction(tau)
    else:
        frac = Fraction(float(tau))
    if frac <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    representable = frac.denominator <= MAX_EXACT_DENOMINATOR
    if exact is None:
        exact = representable
    if exact and not representable:
        raise ValueError(f"tau={tau} has no small denominator; use float mode")
    return (_ExactArithmetic(frac) if exact else _FloatArithmetic(float(frac))), frac


@dataclass
class _Tree:
    levels: list  # levels[l] maps cell index -> capacity, l = 0..L
    chosen: list  # chosen[l] = set of cells whose own weight is the capacity


def _capacities(S: GridSet1D, arith) -> _Tree:
    L = S.level
    levels: list = [None] * (L + 1)
    chosen: list = [None] * (L + 1)
    leaf = arith.weight(L)
    levels[L] = {int(k): leaf for k in S.cells}
    chosen[L] = set(levels[L])
    for lvl in range(L - 1, -1, -1):
        sums: dict = defaultdict(lambda: arith.zero)
        for k, cap in levels[lvl + 1].items():
            sums[k >> 1] = sums[k >> 1] + cap
        own = arith.weight(lvl)
        caps, picks = {}, set()
        for k, total in sums.items():
            if arith.prefer_self(own, total):
                caps[k] = own
                picks.add(k)
            else:
                caps[k] = total
        levels[lvl], chosen[lvl] = caps, picks
    return _Tree(levels, chosen)


def _check_set(S) -> None:
    if not isinstance(S, GridSet1D):
        raise TypeError("content is defined for sets on the line")


def dyadic_content(S: GridSet1D, tau, exact: bool | None = None) -> ContentValue:
    """Minimal sum of |I|^tau over covers of S by dyadic intervals of length
    between the resolution of S and one."""
    _check_set(S)
    arith, frac = _arithmetic(tau, exact)
    tau_out = frac if isinstance(arith, _ExactArithmetic) else float(frac)
    if len(S) == 0:
        return ContentValue(arith.finish(arith.zero), tau_out, ())
    tree = _capacities(S, arith)
    cover = []
    stack = sorted(tree.levels[0], reverse=True)
    stack = [(0, k) for k in stack]
    while stack:
        lvl, k = stack.pop()
        if k in tree.chosen[lvl]:
            cover.append((lvl, k))
            continue
        nxt = tree.levels[lvl + 1]
        for child in (2 * k + 1, 2 * k):
            if child in nxt:
                stack.append((lvl + 1, child))
    value = arith.zero
    for lvl, _ in cover:
        value = value + arith.weight(lvl)
    return ContentValue(arith.finish(value), tau_out, tuple(cover))


def max_frostman(S: GridSet1D, tau, exact: bool | None = None):
    """A measure on S of maximal mass with mu(I) <= |I|^tau on every dyadic I.

    Returns ``(measure, mass)``.  The mass is exact when ``tau`` has a small
    denominator; the measure's weights are Fractions when they happen to be
    rational and floats otherwise.
    """
    _check_set(S)
    if len(S) == 0:
        raise ValueError("max_frostman needs a nonempty set")
    arith, _ = _arithmetic(tau, exact)
    tree = _capacities(S, arith)
    # ratio[k] = mass(I) / capacity(I); children inherit it, scaled at cells
    # whose own weight undercuts the children total
    ratio = {k: 1 for k in tree.levels[0]}
    for lvl in range(0, S.level):
        nxt_caps = tree.levels[lvl + 1]
        child_totals: dict = defaultdict(lambda: arith.zero)
        for c, cap in nxt_caps.items():
            child_totals[c >> 1] = child_totals[c >> 1] + cap
        nxt = {}
        for k, f in ratio.items():
            total = child_totals[k]
            cap = tree.levels[lvl][k]
            if cap == total:
                g = f
            else:
                g = (cap / total) if f == 1 else f * (cap / total)
            for c in (2 * k, 2 * k + 1):
                if c in nxt_caps:
                    nxt[c] = g
        ratio = nxt
    leaf = arith.weight(S.level)
    cells = np.array(sorted(ratio), dtype=np.int64)
    masses = [leaf * ratio[int(k)] if ratio[int(k)] != 1 else leaf for k in cells]
    mass = arith.zero
    for m in masses:
        mass = mass + m
    exact_weights = all(isinstance(m, Surd) and m.is_rational() for m in masses)
    if exact_weights:
        weights = [m.coeffs[0] for m in masses]
    else:
        weights = [float(m) for m in masses]
    return DeltaMeasure(S.level, cells, weights, S.extent), arith.finish(mass)
