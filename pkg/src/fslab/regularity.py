"""Example generators and exhaustive regularity / Frostman checkers."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import log2

import numpy as np

from fslab.dyadic import ExplicitSet2D, GridSet1D, GridSet2D
from fslab.measures import DeltaMeasure, aggregate
from fslab.validation import check_exponent, check_fraction, check_level, check_probability

RATIO_TOL = 1e-12
SET_MODE = "set-upper"
FROSTMAN_MODE = "frostman-upper"


@dataclass(frozen=True)
class RegularityParams:
    exponent: float
    constant: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "exponent", check_exponent(self.exponent, "exponent"))
        constant = float(self.constant)
        if not np.isfinite(constant) or constant < 1.0:
            raise ValueError(f"constant must be finite and >= 1, got {constant}")
        object.__setattr__(self, "constant", constant)


@dataclass(frozen=True)
class RegularityReport:
    satisfied: bool
    worst_ratio: float
    witness: tuple | None  # (center cell, r level, R level)


# ----------------------------------------------------------------- generators


def gen_self_similar(branches: int, contraction_level: int, depth: int,
                     period: int | None = None, offset: int = 0):
    """Cantor set built from ``branches`` copies in arithmetic progression.

    At every stage a cell splits into ``2^contraction_level`` children and the
    children ``offset + k * period`` (k < branches) are kept.  Returns the set
    at level ``contraction_level * depth`` and its uniform natural measure.
    """
    b, m, d = int(branches), int(contraction_level), int(depth)
    if b < 1 or m < 0 or d < 0:
        raise ValueError("need branches >= 1, contraction_level >= 0, depth >= 0")
    level = check_level(m * d, "level")
    children = 1 << m
    if period is None:
        period = max(children // b, 1)
    if b > 1 and period < 1:
        raise ValueError("overlapping branches: period must be at least one cell")
    if offset < 0 or offset + (b - 1) * period >= children:
        raise ValueError("branches do not fit inside the unit interval")
    digits = offset + period * np.arange(b, dtype=np.int64)
    cells = np.zeros(1, dtype=np.int64)
    for _ in range(d):
        cells = (np.repeat(cells, b) << m) + np.tile(digits, cells.size)
    support = GridSet1D(level, cells)
    return support, DeltaMeasure.uniform(support)


def nominal_dimension(branches: int, contraction_level: int) -> float:
    return log2(branches) / contraction_level


def gen_ap_family(n: int, kappa) -> tuple[GridSet1D, GridSet1D]:
    """The arithmetic progression A = {k/n} and slope set E = {k / n^(2 kappa)}."""
    n = int(n)
    if n < 1 or n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n}")
    kappa = check_fraction(kappa, "kappa")
    exponent = 2 * kappa * (n.bit_length() - 1)
    if kappa < 0 or exponent.denominator != 1:
        raise ValueError(f"n^(2 kappa) is not an integer for n={n}, kappa={kappa}")
    count = 1 << int(exponent)
    level = 2 * (n.bit_length() - 1)
    A = GridSet1D.from_points([Fraction(k, n) for k in range(1, n + 1)], level)
    E = GridSet1D.from_points([Fraction(k, count) for k in range(1, count + 1)], level)
    return A, E


def gen_random_cantor(level: int, survival: float, seed: int) -> GridSet1D:
    """Dyadic percolation inside [0, 1): every child survives independently."""
    level = check_level(level)
    survival = check_probability(survival, "survival")
    rng = np.random.default_rng(seed)
    cells = np.zeros(1, dtype=np.int64)
    for _ in range(level):
        children = np.concatenate([2 * cells, 2 * cells + 1])
        children.sort()
        cells = children[rng.random(children.size) < survival]
    return GridSet1D(level, cells)


# ------------------------------------------------------------------- checkers


def all_scale_pairs(level: int, coarsest: int = 0) -> list[tuple[int, int]]:
    return [(r, R) for R in range(coarsest, level + 1) for r in range(R, level + 1)]


def _split_subject(subject):
    if isinstance(subject, DeltaMeasure):
        return subject.support(), subject
    if isinstance(subject, tuple):
        return subject
    return subject, None


def _ball_offsets(dim: int, ball: str) -> np.ndarray:
    if ball == "dyadic":
        return np.zeros((1, dim), dtype=np.int64)
    if ball != "block":
        raise ValueError(f"unknown ball convention {ball!r}")
    steps = np.array([-1, 0, 1], dtype=np.int64)
    if dim == 1:
        return steps.reshape(-1, 1)
    return np.array([(a, b) for a in steps for b in steps], dtype=np.int64)


def _ball_totals(keys: np.ndarray, values: np.ndarray, centers: np.ndarray,
                 offsets: np.ndarray) -> np.ndarray:
    """For each center cell, total of ``values`` over ``keys`` in the center's ball."""
    keys = keys.reshape(len(keys), -1)
    centers = centers.reshape(len(centers), -1)
    lo = np.minimum(keys.min(axis=0), centers.min(axis=0)) - 1
    width = np.maximum(keys.max(axis=0), centers.max(axis=0)) - lo + 2
    def encode(cells):
        code = np.zeros(len(cells), dtype=np.int64)
        for axis in range(cells.shape[1]):
            code = code * width[axis] + (cells[:, axis] - lo[axis])
        return code
    key_codes = encode(keys)
    order = np.argsort(key_codes)
    key_codes, values = key_codes[order], values[order]
    total = np.zeros(len(centers), dtype=np.float64)
    for off in offsets:
        probe = encode(centers + off)
        pos = np.searchsorted(key_codes, probe)
        pos_clip = np.minimum(pos, len(key_codes) - 1)
        hit = key_codes[pos_clip] == probe
        total += np.where(hit, values[pos_clip], 0.0)
    return total


def check_regularity(subject, params: RegularityParams, mode: str = SET_MODE,
                     scales=None, ball: str = "block") -> RegularityReport:
    """Exhaustive check over all set cells as centres and all scale pairs.

    ``subject`` is a grid set, a measure, or a ``(set, measure)`` pair.  In
    set mode the ratio is ``N_r(K cap B(x,R)) / (R/r)^a``; in Frostman mode it
    is ``mu(B(x,s)) / s^a`` for both radii ``s`` of each pair.  Balls are the
    block of 3 (or 3x3) cells of side R around the centre's own R-cell, or just
    that R-cell when ``ball="dyadic"``.
    """
    K, mu = _split_subject(subject)
    if isinstance(K, GridSet2D):
        K = K.explicit()
    if len(K) == 0:
        raise ValueError("empty subject")
    if mode == FROSTMAN_MODE and mu is None:
        raise ValueError("Frostman mode needs a measure")
    if mode not in (SET_MODE, FROSTMAN_MODE):
        raise ValueError(f"unknown mode {mode!r}")
    L = K.level
    pairs = all_scale_pairs(L) if scales is None else [(int(r), int(R)) for r, R in scales]
    for r, R in pairs:
        if not R <= r <= L:
            raise ValueError(f"scale pair (r={r}, R={R}) must satisfy R <= r <= {L}")
    a = params.exponent
    planar = isinstance(K, ExplicitSet2D)
    offsets = _ball_offsets(2 if planar else 1, ball)
    cells = K.cells
    worst, witness = -np.inf, None

    def consider(ratios, parents_of_centres, r, R):
        nonlocal worst, witness
        k = int(np.argmax(ratios))
        if ratios[k] > worst:
            worst = float(ratios[k])
            centre = cells[parents_of_centres[k]]
            centre = tuple(int(c) for c in centre) if planar else int(centre)
            witness = (centre, r, R)

    if mode == SET_MODE:
        coarse = {}  # level -> (distinct cells, index of a representative)
        for r, R in pairs:
            for lvl in (r, R):
                if lvl not in coarse:
                    coarse[lvl] = _unique_first(cells >> (L - lvl))
            fine = coarse[r][0]
            keys, counts = aggregate(fine >> (r - R), np.ones(len(fine)))
            centres, first = coarse[R]
            totals = _ball_totals(keys, counts, centres, offsets)
            consider(totals / 2.0 ** (a * (r - R)), first, r, R)
    else:
        weights = mu.float_weights()
        if mu.level != L:
            raise ValueError("measure and set levels differ")
        radii = sorted({s for pair in pairs for s in pair})
        for s in radii:
            keys, masses = aggregate(mu.cells >> (L - s), weights)
            centres, first = _unique_first(cells >> (L - s))
            totals = _ball_totals(keys, masses, centres, offsets)
            consider(totals / 2.0 ** (-a * s), first, s, s)
    satisfied = worst <= params.constant * (1 + RATIO_TOL)
    return RegularityReport(bool(satisfied), worst, witness)


def _unique_first(parents: np.ndarray):
    if parents.ndim == 2:
        uniq, first = np.unique(parents, axis=0, return_index=True)
    else:
        uniq, first = np.unique(parents, return_index=True)
    return uniq, first


def minimal_constant(subject, exponent: float, mode: str = SET_MODE, scales=None,
                     ball: str = "block") -> float:
    """Smallest constant (at least 1) for which the exhaustive check passes."""
    report = check_regularity(subject, RegularityParams(exponent, 1.0), mode, scales, ball)
    return max(1.0, report.worst_ratio)
