"""Projections, sumsets, multiplicity numbers and high-multiplicity sets.

Conventions.  A planar set is a set of grid points (the lower-left corners of
its cells).  ``pi_theta(x, y) = x + theta * y`` with ``theta = p / 2^q``, so
every projected value is an integer in units of ``2^-(L + q)``.

The multiplicity of a point x at scales ``[r, R]`` counts, along the line
through x of slope ``-1/theta``, the level-r rows in which that line meets the
r-thickening ``K_r`` of K inside the ball around x.  ``K_r`` is the sup-norm
one-cell dilation of the level-r cover of K; the ball is the 3x3 block of
level-R cells around the R-cell of x (the whole plane when ``R is None``).
Counting rows rather than cells makes coverings of the fiber exactly
compatible with dyadic coarsening.  A level-r cell (a, b) meets the line
``u + theta v = t`` iff ``a 2^q + p b <= t 2^(r+q) < (a+1) 2^q + p (b+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import fftconvolve

from fslab.content import ContentValue, dyadic_content
from fslab.dyadic import (
    Direction,
    ExplicitSet2D,
    GridSet1D,
    GridSet2D,
    ProductSet2D,
    dilate_2d,
    direction_grid,
    rows_in,
)
from fslab.measures import DeltaMeasure, product_measure
from fslab.parallel import parallel_map

_OUTER_LIMIT = 4_000_000
_DENSE_LIMIT = 1 << 27
_INT_BUDGET = 1 << 62


@dataclass(frozen=True)
class ScaleWindow:
    """Levels of the small scale r and the large scale R (None = infinite)."""

    r: int
    R: int | None = None

    def __post_init__(self):
        if self.R is not None and self.R > self.r:
            raise ValueError(f"window needs r finer than R, got r={self.r}, R={self.R}")

    def scaled(self, levels: int) -> "ScaleWindow":
        """Window after multiplying both radii by 2^levels."""
        return ScaleWindow(self.r - levels, None if self.R is None else self.R - levels)


def _explicit(K) -> ExplicitSet2D:
    if not isinstance(K, GridSet2D):
        raise TypeError("expected a planar grid set")
    return K.explicit()


def _projected(cells: np.ndarray, theta: Direction) -> np.ndarray:
    """pi_theta of the cell corners, in units of 2^-(L+q)."""
    return (cells[:, 0] << theta.level) + theta.numerator * cells[:, 1]


# ------------------------------------------------------------------- sumsets


def sumset(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Sorted distinct values x + y for integer arrays X, Y."""
    if X.size == 0 or Y.size == 0:
        return np.empty(0, dtype=np.int64)
    X, Y = np.unique(X), np.unique(Y)
    span = int(X[-1] - X[0] + Y[-1] - Y[0]) + 1
    if X.size * Y.size <= _OUTER_LIMIT or span > _DENSE_LIMIT:
        return np.unique(np.add.outer(X, Y))
    a = np.zeros(int(X[-1] - X[0]) + 1)
    b = np.zeros(int(Y[-1] - Y[0]) + 1)
    a[X - X[0]] = 1.0
    b[Y - Y[0]] = 1.0
    hits = np.flatnonzero(fftconvolve(a, b) > 0.5)
    return hits.astype(np.int64) + X[0] + Y[0]


def project_set(K: GridSet2D, theta: Direction, target: int) -> GridSet1D:
    """Level-``target`` cells containing pi_theta of the points of K."""
    if target > K.level:
        raise ValueError("target level finer than the set")
    extent = (2 * K.extent[0], 2 * K.extent[1])
    if isinstance(K, ProductSet2D):
        # floor((a 2^q + p b) / 2^q) = a + floor(theta b), then coarsen
        shifted = theta.scale_floor(K.second.cells)
        values = sumset(K.first.cells, shifted)
        return GridSet1D(target, np.unique(values >> (K.level - target)), extent)
    cells = _explicit(K).cells
    values = _projected(cells, theta) >> (theta.level + K.level - target)
    return GridSet1D(target, np.unique(values), extent)


def affine_sumset(A: GridSet1D, E: GridSet1D, B: GridSet1D, target: int) -> GridSet1D:
    """Level-``target`` cells of the union over c in E of A + cB."""
    if not A.level == E.level == B.level:
        raise ValueError("affine_sumset needs a common level")
    L = A.level
    if target > L:
        raise ValueError("target level finer than the inputs")
    extent = (A.extent[0] + 4 * B.extent[0], A.extent[1] + 4 * B.extent[1])
    parts = []
    for e in E.cells.tolist():
        # c b = e b 2^-2L; floor to level L is floor(e b / 2^L)
        scaled = (B.cells * e) >> L
        parts.append(sumset(A.cells, scaled) >> (L - target))
    cells = np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
    return GridSet1D(target, cells, extent)


# -------------------------------------------------------------- multiplicity


def thickening(K: GridSet2D, r: int, width: int = 0) -> np.ndarray:
    """Cells of K_r at level r: the level-r cells meeting K, optionally
    dilated by ``width`` cells in the sup norm."""
    cells = _explicit(K).cells
    if r > K.level:
        raise ValueError("thickening scale finer than the set")
    cover = row_ids(cells >> (K.level - r))[1]
    return dilate_2d(cover, width) if width else cover


def row_ids(rows: np.ndarray):
    """Dense ids of the distinct rows of an integer (n, k) array.

    Returns ``(ids, distinct_rows)`` with distinct rows sorted lexicographically.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), rows
    lo = rows.min(axis=0)
    width = rows.max(axis=0) - lo + 1
    total = 1
    for w in width.tolist():
        total *= int(w)
    if total >= _INT_BUDGET:
        uniq, inv = np.unique(rows, axis=0, return_inverse=True)
        return inv.reshape(-1), uniq
    code = np.zeros(rows.shape[0], dtype=np.int64)
    for axis in range(rows.shape[1]):
        code = code * width[axis] + (rows[:, axis] - lo[axis])
    uniq_code, first, inv = np.unique(code, return_index=True, return_inverse=True)
    return inv.reshape(-1), rows[first]


def _merge_runs(group: np.ndarray, low: np.ndarray, high: np.ndarray):
    """Union of half-open intervals inside each group; returns disjoint runs."""
    order = np.lexsort((low, group))
    g, lo, hi = group[order], low[order], high[order]
    n = g.size
    start = np.ones(n, dtype=bool)
    start[1:] = g[1:] != g[:-1]
    first = np.flatnonzero(start)
    base = np.repeat(lo[first], np.diff(np.r_[first, n]))
    big = int((hi - base).max()) + 1
    if int(g.max()) * big + big >= _INT_BUDGET:
        raise OverflowError("interval ranges too large for grouped merging")
    packed = np.maximum.accumulate(g * big + (hi - base))
    running = packed - g * big + base
    new = start.copy()
    new[1:] |= lo[1:] > running[:-1]
    idx = np.flatnonzero(new)
    return g[idx], lo[idx], np.maximum.reduceat(hi, idx)


def _stab_counts(run_group, run_low, run_high, q_group, q_t) -> np.ndarray:
    """For each query, number of runs of its group containing its point."""
    out = np.zeros(q_t.size, dtype=np.int64)
    if run_group.size == 0 or q_t.size == 0:
        return out
    n_groups = int(max(run_group.max(), q_group.max())) + 1
    base = np.full(n_groups, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(base, run_group, run_low)
    base[base == np.iinfo(np.int64).max] = 0
    top = int(max((run_high - base[run_group]).max(), 0)) + 2
    if n_groups * top >= _INT_BUDGET:
        raise OverflowError("interval ranges too large for grouped counting")
    rel_q = np.clip(q_t - base[q_group], -1, top - 2) + 1
    key_q = q_group * top + rel_q
    lows = np.sort(run_group * top + (run_low - base[run_group] + 1))
    highs = np.sort(run_group * top + (run_high - base[run_group] + 1))
    floor_q = q_group * top
    below_low = np.searchsorted(lows, key_q, "right") - np.searchsorted(lows, floor_q, "left")
    below_high = np.searchsorted(highs, key_q, "right") - np.searchsorted(highs, floor_q, "left")
    return below_low - below_high


def _cell_intervals(cells: np.ndarray, theta: Direction, scale_shift: int):
    """Line-parameter intervals [low, high) met by cells, in finer units."""
    low = _projected(cells, theta)
    high = low + (1 << theta.level) + theta.numerator
    return low << scale_shift, high << scale_shift


class FiberIndex:
    """Direction-independent bookkeeping for multiplicity numbers of one set.

    Building it once and calling :meth:`counts` for many directions avoids
    recomputing the thickening and the ball structure.
    """

    def __init__(self, K: GridSet2D, window: ScaleWindow, points: np.ndarray | None = None):
        Kx = _explicit(K)
        self.level = L = Kx.level
        if window.r > L:
            raise ValueError("window scale r finer than the set")
        self.window = window
        self.points = Kx.cells if points is None else np.asarray(points, dtype=np.int64).reshape(-1, 2)
        r = window.r
        thick = thickening(Kx, r)
        if window.R is None:
            self.cells = thick
            self.pair_id = row_ids(thick[:, 1:])[0]
            self.pair_dest = np.zeros(int(self.pair_id.max(initial=0)) + 1, dtype=np.int64)
            self.q_group = np.zeros(self.points.shape[0], dtype=np.int64)
            return
        R = window.R
        offsets = np.array([(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)], dtype=np.int64)
        home = thick >> (r - R)
        dest = (home[None, :, :] + offsets[:, None, :]).reshape(-1, 2)
        q_home = self.points >> (L - R)
        ids = row_ids(np.vstack([dest, q_home]))[0]
        dest_id, self.q_group = ids[: dest.shape[0]], ids[dest.shape[0]:]
        self.cells = np.tile(thick, (offsets.shape[0], 1))
        self.pair_id = row_ids(np.column_stack([dest_id, self.cells[:, 1]]))[0]
        self.pair_dest = np.zeros(int(self.pair_id.max(initial=0)) + 1, dtype=np.int64)
        self.pair_dest[self.pair_id] = dest_id

    def counts(self, theta: Direction) -> np.ndarray:
        if self.points.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        low, high = _cell_intervals(self.cells, theta, self.level - self.window.r)
        run_pair, run_low, run_high = _merge_runs(self.pair_id, low, high)
        query_t = _projected(self.points, theta)
        return _stab_counts(self.pair_dest[run_pair], run_low, run_high, self.q_group, query_t)


def multiplicities(K: GridSet2D, theta: Direction, window: ScaleWindow,
                   points: np.ndarray | None = None) -> np.ndarray:
    """Multiplicity numbers of ``points`` (default: every point of K)."""
    return FiberIndex(K, window, points).counts(theta)


def multiplicity(K: GridSet2D, theta: Direction, x, window: ScaleWindow) -> int:
    if tuple(x) not in K:
        raise ValueError(f"point {tuple(x)} is not in K")
    return int(multiplicities(K, theta, window, np.asarray([x]))[0])


def _threshold(M) -> int:
    value = Fraction(M) if not isinstance(M, float) else M
    if value < 1:
        return 1
    return int(math.ceil(value))


def high_multiplicity_set(K: GridSet2D, theta: Direction, M, window: ScaleWindow) -> ExplicitSet2D:
    Kx = _explicit(K)
    if M < 1:
        raise ValueError("threshold M must be at least 1")
    counts = multiplicities(Kx, theta, window)
    return Kx.with_cells(Kx.cells[counts >= _threshold(M)])


# --------------------------------------------------------------------- balls


def in_ball(cells: np.ndarray, level: int, radius: int = 1) -> np.ndarray:
    """Cells whose corner lies in the square [-radius, radius)^2."""
    bound = radius << level
    return ((cells >= -bound) & (cells < bound)).all(axis=1)


def restricted_mass(mu: DeltaMeasure, cells: np.ndarray, radius: int) -> float:
    """mu(B(radius) intersected with a set of cells)."""
    mask = rows_in(mu.cells, cells) & in_ball(mu.cells, mu.level, radius)
    return float(np.sum(mu.float_weights()[mask]))


# ---------------------------------------------------------------------- scans


@dataclass(frozen=True)
class ScanRow:
    theta: Direction
    hm_mass: float
    covering: int
    dimension_ratio: float


@dataclass(frozen=True)
class ScanResult:
    rows: tuple
    exceptional_set: GridSet1D
    exceptional_content: ContentValue
    threshold: int
    mass_threshold: float


def _scan_chunk(args):
    index, weights, threshold, product_set, thetas = args
    inside = in_ball(index.points, index.level, 1)
    r = index.window.r
    rows = []
    for theta in thetas:
        counts = index.counts(theta)
        hm_mass = float(np.sum(weights[(counts >= threshold) & inside]))
        covering = len(project_set(product_set, theta, r))
        ratio = math.log2(covering) / r if r > 0 else 0.0
        rows.append(ScanRow(theta, hm_mass, covering, ratio))
    return rows


def _chunks(items: list, pieces: int) -> list:
    pieces = max(1, min(pieces, len(items)))
    step = -(-len(items) // pieces)
    return [items[i:i + step] for i in range(0, len(items), step)]


def hm_scan(mu_a: DeltaMeasure, mu_b: DeltaMeasure, sigma: float, eta: float,
            window: ScaleWindow, theta_level: int, tau, jobs: int = 1,
            thetas=None) -> ScanResult:
    """Mass of the high-multiplicity set for every direction on a dyadic grid.

    The threshold is ``ceil(delta^-sigma)`` with ``delta = 2^-window.r``; a
    direction is exceptional when the mass reaches ``delta^eta``.  Rows come
    back in direction order for any number of jobs.
    """
    thetas = list(direction_grid(theta_level)) if thetas is None else list(thetas)
    if not thetas:
        raise ValueError("empty theta grid")
    mu = product_measure(mu_a.normalized(), mu_b.normalized())
    K = mu.support()
    index = FiberIndex(K, window)
    product_set = ProductSet2D(mu_a.support(), mu_b.support())
    weights = mu.float_weights()
    threshold = hm_threshold(window.r, sigma)
    mass_threshold = 2.0 ** (-window.r * eta)
    jobs = 1 if jobs is None else jobs
    tasks = [(index, weights, threshold, product_set, chunk)
             for chunk in _chunks(thetas, 4 * jobs if jobs > 1 else 1)]
    rows = tuple(row for part in parallel_map(_scan_chunk, tasks, jobs) for row in part)
    flagged = [row.theta.numerator << (theta_level - row.theta.level)
               for row in rows if row.hm_mass >= mass_threshold]
    exceptional = GridSet1D(theta_level, np.asarray(flagged, dtype=np.int64))
    content = dyadic_content(exceptional, tau)
    return ScanResult(rows, exceptional, content, threshold, mass_threshold)


def hm_threshold(level: int, sigma: float) -> int:
    """ceil(delta^-sigma) for delta = 2^-level, never below one."""
    return max(1, math.ceil(2.0 ** (level * sigma)))


# -------------------------------------------------------- single-scale check


@dataclass(frozen=True)
class SingleScaleOutcome:
    theta: Direction | None
    verified: bool
    target: float
    fewest_bins: dict  # theta numerator -> minimal covering number of a heavy subset


def single_scale_check(K: GridSet2D, mu: DeltaMeasure, E: GridSet1D, sigma: float,
                       eta: float, delta: int, alpha: float, beta: float) -> SingleScaleOutcome:
    """Search E for a direction whose projections of all heavy subsets are large.

    A heavy subset has mass at least ``delta^eta``.  For a fixed direction the
    heavy subset with the fewest projected cells is found exactly by taking
    whole projection bins in decreasing order of mass, so the quantifier over
    subsets is decided without enumeration.
    """
    if len(E) == 0:
        raise ValueError("empty direction set")
    Kx = _explicit(K)
    if mu.dim != 2 or mu.level != Kx.level:
        raise ValueError("measure must live on the planar grid of K")
    mask = rows_in(mu.cells, Kx.cells)
    cells, weights = mu.cells[mask], mu.float_weights()[mask]
    heavy = 2.0 ** (-delta * eta)
    target = 2.0 ** (-delta * (sigma + eta - alpha - beta))
    fewest: dict = {}
    found = None
    for p in E.cells.tolist():
        theta = Direction(p, E.level)
        bins = _projected(cells, theta) >> (theta.level + Kx.level - delta)
        _, inverse = np.unique(bins, return_inverse=True)
        masses = np.sort(np.bincount(inverse.reshape(-1), weights=weights))[::-1]
        reach = np.cumsum(masses)
        if reach.size == 0 or reach[-1] < heavy * (1 - 1e-12):
            fewest[p] = math.inf  # no heavy subset at all
        else:
            fewest[p] = int(np.searchsorted(reach, heavy * (1 - 1e-12)) + 1)
        if found is None and fewest[p] >= target:
            found = theta
    return SingleScaleOutcome(found, found is not None, target, fewest)


# ------------------------------------------------------ decomposition probes


def _dense_count(low: np.ndarray, high: np.ndarray, origin: int, size: int) -> np.ndarray:
    diff = np.zeros(size + 1, dtype=np.int64)
    np.add.at(diff, low - origin, 1)
    np.add.at(diff, high - origin, -1)
    return np.cumsum(diff)[:size]


@dataclass(frozen=True)
class FiberDecomposition:
    c1_min: Fraction
    c2_min: Fraction
    positions: int


def fiber_decomposition_check(K: GridSet2D, theta: Direction, r: int, R: int) -> FiberDecomposition:
    """Smallest constants in the two fiber-counting inequalities, exhaustively.

    With ``F_r(t)`` the number of level-r rows where the line ``pi_theta = t``
    meets ``K_r`` inside B(2), ``F_R(t)`` the same for ``K_R`` inside B(3) at
    level R, and the level-R cells meeting ``K_r`` as the cover, returns the
    largest ratios ``F_r / sum_B F_r(B)`` and ``#{B : F_r(B) > 0} / F_R`` over
    all line positions.  Positions are integers in units of ``2^-(r+q)``,
    which separates every combinatorially distinct line.
    """
    Kx = _explicit(K)
    if not R <= r <= Kx.level:
        raise ValueError("need R <= r <= level of K")
    if len(Kx) == 0:
        raise ValueError("empty set")
    fine = thickening(Kx, r)
    fine = fine[in_ball(fine, r, 2)]
    coarse = thickening(Kx, R)
    coarse = coarse[in_ball(coarse, R, 3)]
    lo_f, hi_f = _cell_intervals(fine, theta, 0)
    lo_c, hi_c = _cell_intervals(coarse, theta, r - R)
    origin = int(min(lo_f.min(initial=0), lo_c.min(initial=0)))
    size = int(max(hi_f.max(initial=0), hi_c.max(initial=0))) - origin + 1

    def runs(keys):
        gid = row_ids(keys.reshape(len(keys), -1))[0]
        return _merge_runs(gid, lo_f, hi_f)

    home = fine >> (r - R)
    _, a, b = runs(fine[:, 1])
    f_r = _dense_count(a, b, origin, size)
    _, a, b = runs(np.column_stack([home, fine[:, 1]]))
    per_ball = _dense_count(a, b, origin, size)
    _, a, b = runs(home)
    balls_hit = _dense_count(a, b, origin, size)
    _, a, b = _merge_runs(row_ids(coarse[:, 1:])[0], lo_c, hi_c)
    f_big = _dense_count(a, b, origin, size)

    def worst(num, den):
        live = num > 0
        if not live.any():
            return Fraction(0)
        if (den[live] == 0).any():
            return Fraction(10**18)
        ratios = num[live] / den[live]
        k = int(np.argmax(ratios))
        return Fraction(int(num[live][k]), int(den[live][k]))

    return FiberDecomposition(worst(f_r, per_ball), worst(balls_hit, f_big), size)


@dataclass(frozen=True)
class Prop3Probe:
    lhs: float
    rhs1: float
    rhs2: float
    holds: bool


def prop3_probe(mu: DeltaMeasure, theta: Direction, M, N, r: int, R: int,
                c: float, C: float, c_gamma: float = 1.0) -> Prop3Probe:
    """Evaluate both sides of the three-window multiplicity decomposition.

    The left side is ``mu_1(H(C N, [r, 1]))``; the right side adds
    ``mu_1(H(c M, [4R, 5]))`` and ``C c_gamma^2 mu_4(H(c N / M, [4r, 7R]))``
    where ``mu_s`` is the restriction to B(s).  The non-dyadic radii 5 and 7R
    are rounded up to 8 and 8R, which can only enlarge the right side.
    """
    if not 1 <= M <= N:
        raise ValueError("need 1 <= M <= N")
    if R > r:
        raise ValueError("need r finer than R")
    K = mu.support()
    cells = K.cells

    def hm_mass(threshold, window, radius):
        if threshold > 1:
            counts = multiplicities(K, theta, window)
            hit = counts >= _threshold(threshold)
        else:
            hit = np.ones(cells.shape[0], dtype=bool)
        mask = hit & in_ball(cells, K.level, radius)
        return float(np.sum(mu.float_weights()[mask]))

    lhs = hm_mass(C * N, ScaleWindow(r, 0), 1)
    rhs1 = hm_mass(c * M, ScaleWindow(R - 2, -3), 1)
    rhs2 = C * c_gamma ** 2 * hm_mass(c * N / M, ScaleWindow(r - 2, R - 3), 4)
    holds = lhs <= (rhs1 + rhs2) * (1 + 1e-12) + 1e-15
    return Prop3Probe(lhs, rhs1, rhs2, bool(holds))
