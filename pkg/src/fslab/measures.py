"""Finitely supported measures on dyadic grids.

Weights are kept as exact ``Fraction`` objects when the caller supplies
rationals and as float64 otherwise.  Entropies are always floats in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy.signal import fftconvolve

from fslab.config import DEFAULT_EXTENT
from fslab.dyadic import (
    Direction,
    ExplicitSet2D,
    GridSet1D,
    GridSet2D,
    rows_in,
)
from fslab.validation import check_level

PROBABILITY_TOL = 1e-12
DIRECT_CONVOLUTION_LIMIT = 2**15
_DENSE_SPAN_LIMIT = 2**26


def _is_exact(weights: np.ndarray) -> bool:
    return weights.dtype == object


def _as_weights(weights) -> np.ndarray:
    seq = list(weights) if not isinstance(weights, np.ndarray) else weights
    if isinstance(seq, np.ndarray) and seq.dtype != object:
        return seq.astype(np.float64)
    if all(isinstance(w, (Rational, int, np.integer)) for w in seq):
        return np.array([Fraction(w) for w in seq] or [], dtype=object)
    return np.asarray([float(w) for w in seq], dtype=np.float64)


def _zeros_like(weights: np.ndarray, n: int) -> np.ndarray:
    if _is_exact(weights):
        out = np.empty(n, dtype=object)
        out[:] = Fraction(0)
        return out
    return np.zeros(n, dtype=np.float64)


def aggregate(keys: np.ndarray, weights: np.ndarray):
    """Sum weights sharing a key; keys are 1D ints or (n, 2) int rows."""
    if keys.ndim == 1:
        uniq, inverse = np.unique(keys, return_inverse=True)
    else:
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    if _is_exact(weights):
        sums = _zeros_like(weights, len(uniq))
        np.add.at(sums, inverse, weights)
    else:
        sums = np.bincount(inverse, weights=weights, minlength=len(uniq))
    return uniq, sums


@dataclass(frozen=True, eq=False)
class DeltaMeasure:
    level: int
    cells: np.ndarray
    weights: np.ndarray
    extent: tuple[int, int] = DEFAULT_EXTENT

    def __post_init__(self):
        check_level(self.level)
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim == 2 and cells.shape[0] == 0:
            cells = cells.reshape(0, 2)
        elif cells.ndim != 2:
            cells = cells.reshape(-1)
        weights = _as_weights(self.weights)
        if weights.shape[0] != cells.shape[0]:
            raise ValueError("cells and weights differ in length")
        if weights.size and any(w < 0 for w in weights):
            raise ValueError("negative weight")
        if cells.shape[0]:
            cells, weights = aggregate(cells, weights)
        keep = np.array([w > 0 for w in weights], dtype=bool)
        cells, weights = cells[keep], weights[keep]
        if weights.size and not _is_exact(weights) and not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        cells.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "weights", weights)

    # constructors -----------------------------------------------------------

    @classmethod
    def from_dict(cls, level: int, mapping: dict, extent=DEFAULT_EXTENT) -> "DeltaMeasure":
        cells = list(mapping.keys())
        return cls(level, np.asarray(cells, dtype=np.int64), list(mapping.values()), extent)

    @classmethod
    def uniform(cls, support, exact: bool = True) -> "DeltaMeasure":
        """Uniform probability measure on a grid set."""
        if isinstance(support, GridSet2D):
            support = support.explicit()
        n = len(support)
        if n == 0:
            raise ValueError("uniform measure on an empty set")
        w = [Fraction(1, n)] * n if exact else np.full(n, 1.0 / n)
        return cls(support.level, support.cells, w, support.extent)

    @classmethod
    def point(cls, level: int, cell, extent=DEFAULT_EXTENT) -> "DeltaMeasure":
        cells = np.asarray([cell], dtype=np.int64)
        return cls(level, cells, [Fraction(1)], extent)

    # basic queries ------------------------------------------------------------

    @property
    def dim(self) -> int:
        return 2 if self.cells.ndim == 2 else 1

    @property
    def exact(self) -> bool:
        return _is_exact(self.weights)

    def __len__(self) -> int:
        return int(self.cells.shape[0])

    def __repr__(self) -> str:
        kind = "exact" if self.exact else "float"
        return f"DeltaMeasure(level={self.level}, d={self.dim}, n={len(self)}, {kind})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DeltaMeasure):
            return NotImplemented
        return (self.level == other.level and np.array_equal(self.cells, other.cells)
                and len(self.weights) == len(other.weights)
                and all(a == b for a, b in zip(self.weights, other.weights)))

    __hash__ = None

    def mass(self):
        if self.exact:
            return sum(self.weights, Fraction(0))
        return float(np.sum(self.weights))

    def is_probability(self) -> bool:
        total = self.mass()
        if self.exact:
            return total == 1
        return abs(total - 1.0) <= PROBABILITY_TOL

    def as_float(self) -> "DeltaMeasure":
        if not self.exact:
            return self
        return DeltaMeasure(self.level, self.cells, self.weights.astype(np.float64), self.extent)

    def float_weights(self) -> np.ndarray:
        return self.weights.astype(np.float64)

    def normalized(self) -> "DeltaMeasure":
        total = self.mass()
        if total == 0:
            raise ValueError("cannot normalize the zero measure")
        return DeltaMeasure(self.level, self.cells, self.weights / total, self.extent)

    def support(self):
        if self.dim == 1:
            return GridSet1D(self.level, self.cells, self.extent)
        return ExplicitSet2D(self.level, self.cells, self.extent)

    def weight_of(self, cell):
        """Mass of a single cell (zero when absent)."""
        if self.dim == 1:
            pos = np.searchsorted(self.cells, cell)
            if pos < len(self) and self.cells[pos] == cell:
                return self.weights[pos]
        else:
            hit = np.flatnonzero(rows_in(self.cells, np.asarray([cell])))
            if hit.size:
                return self.weights[hit[0]]
        return Fraction(0) if self.exact else 0.0

    def coarsen(self, target: int) -> "DeltaMeasure":
        """Push the measure forward to the cells of a coarser level."""
        target = check_level(target, "target")
        if target > self.level:
            raise ValueError("target level finer than the measure")
        return DeltaMeasure(target, self.cells >> (self.level - target), self.weights, self.extent)

    def mass_of(self, S) -> float | Fraction:
        mask = _membership(self, S)
        if self.exact:
            return sum(self.weights[mask], Fraction(0))
        return float(np.sum(self.weights[mask]))

    def restrict(self, mask: np.ndarray) -> "DeltaMeasure":
        return DeltaMeasure(self.level, self.cells[mask], self.weights[mask], self.extent)


def _membership(mu: DeltaMeasure, S) -> np.ndarray:
    """Cells of ``mu`` lying inside grid set ``S`` (S may be coarser)."""
    if S.level > mu.level:
        raise ValueError("set is finer than the measure")
    shift = mu.level - S.level
    if mu.dim == 1:
        if not isinstance(S, GridSet1D):
            raise ValueError("dimension mismatch")
        return np.isin(mu.cells >> shift, S.cells)
    if not isinstance(S, GridSet2D):
        raise ValueError("dimension mismatch")
    return rows_in(mu.cells >> shift, S.explicit().cells)


# ------------------------------------------------------------------- entropy


def _check_probability(mu: DeltaMeasure) -> None:
    if not mu.is_probability():
        raise ValueError(f"entropy needs a probability measure (mass {float(mu.mass())})")


def _entropy_of_masses(masses: np.ndarray) -> float:
    p = masses[masses > 0]
    return float(-np.sum(p * np.log2(p)))


def _nonnegative(value: float) -> float:
    # rounding can leave -0.0 or -1e-17 for degenerate partitions
    return value if value > 0 else 0.0


def entropy(mu: DeltaMeasure, target: int) -> float:
    """Entropy in bits of ``mu`` with respect to the level-``target`` partition."""
    _check_probability(mu)
    coarse = mu.coarsen(target)
    return _nonnegative(_entropy_of_masses(coarse.float_weights()))


def conditional_entropy(mu: DeltaMeasure, fine: int, coarse: int) -> float:
    """Average over coarse cells E of the entropy of the normalized restriction to E."""
    _check_probability(mu)
    if not coarse <= fine <= mu.level:
        raise ValueError("need coarse <= fine <= measure level")
    fine_mu = mu.coarsen(fine)
    parents = fine_mu.cells >> (fine - coarse)
    uniq, parent_mass = aggregate(parents, fine_mu.weights)
    idx = np.searchsorted(uniq, parents)
    own = fine_mu.float_weights()
    ratio = own / parent_mass.astype(np.float64)[idx]
    # sum_E mu(E) * sum_{F in E} mu_E(F) log(1 / mu_E(F))
    return _nonnegative(float(-np.sum(own * np.log2(ratio))))


def restrict_normalize(mu: DeltaMeasure, S) -> DeltaMeasure:
    mask = _membership(mu, S)
    part = mu.restrict(mask)
    if len(part) == 0:
        raise ValueError("restriction to null set")
    return part.normalized()


def l2_norm(mu: DeltaMeasure) -> float:
    if mu.dim != 1:
        raise ValueError("the L2 norm is defined for measures on the line")
    w = mu.float_weights()
    return float(np.sqrt(np.dot(w, w)))


# --------------------------------------------------------------- convolution


def convolve(mu: DeltaMeasure, nu: DeltaMeasure, method: str = "auto") -> DeltaMeasure:
    """Additive convolution of two measures on the same one-dimensional grid.

    ``method`` is ``"direct"`` (sparse pairwise sums), ``"fft"`` (dense
    transform) or ``"auto"``, which picks direct summation for exact weights
    and for small supports.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("convolution needs one-dimensional measures")
    if mu.level != nu.level:
        raise ValueError(f"level mismatch: {mu.level} != {nu.level}")
    extent = (mu.extent[0] + nu.extent[0], mu.extent[1] + nu.extent[1])
    if len(mu) == 0 or len(nu) == 0:
        return DeltaMeasure(mu.level, np.empty(0, dtype=np.int64), [], extent)
    exact = mu.exact and nu.exact
    if method == "auto":
        small = len(mu) * len(nu) < DIRECT_CONVOLUTION_LIMIT
        span = _span(mu) + _span(nu)
        method = "direct" if exact or small or span > _DENSE_SPAN_LIMIT else "fft"
    if method == "direct":
        cells = np.add.outer(mu.cells, nu.cells).ravel()
        if exact:
            weights = np.multiply.outer(mu.weights, nu.weights).ravel()
        else:
            weights = np.multiply.outer(mu.float_weights(), nu.float_weights()).ravel()
        return DeltaMeasure(mu.level, cells, weights, extent)
    if method != "fft":
        raise ValueError(f"unknown convolution method {method!r}")
    lo_a, lo_b = int(mu.cells[0]), int(nu.cells[0])
    dense_a = np.zeros(_span(mu))
    dense_b = np.zeros(_span(nu))
    dense_a[mu.cells - lo_a] = mu.float_weights()
    dense_b[nu.cells - lo_b] = nu.float_weights()
    values = fftconvolve(dense_a, dense_b)
    # support of the result = sumset of supports, read off an indicator convolution
    hits = fftconvolve(dense_a > 0, dense_b > 0) > 0.5
    idx = np.flatnonzero(hits)
    return DeltaMeasure(mu.level, idx + lo_a + lo_b, np.clip(values[idx], 0.0, None), extent)


def _span(mu: DeltaMeasure) -> int:
    return int(mu.cells[-1] - mu.cells[0]) + 1


# --------------------------------------------------------------- projections


def product_measure(mu_a: DeltaMeasure, mu_b: DeltaMeasure) -> DeltaMeasure:
    if mu_a.dim != 1 or mu_b.dim != 1 or mu_a.level != mu_b.level:
        raise ValueError("product needs two line measures on the same level")
    cells = np.column_stack([np.repeat(mu_a.cells, len(mu_b)), np.tile(mu_b.cells, len(mu_a))])
    if mu_a.exact and mu_b.exact:
        weights = np.multiply.outer(mu_a.weights, mu_b.weights).ravel()
    else:
        weights = np.multiply.outer(mu_a.float_weights(), mu_b.float_weights()).ravel()
    return DeltaMeasure(mu_a.level, cells.reshape(-1, 2), weights, mu_a.extent)


def scale_round(mu: DeltaMeasure, theta: Direction) -> DeltaMeasure:
    """Pushforward of a line measure under y -> [theta y]."""
    return DeltaMeasure(mu.level, theta.scale_floor(mu.cells), mu.weights, mu.extent)


def push_project(mu2d: DeltaMeasure, theta: Direction) -> DeltaMeasure:
    """Pushforward of a planar measure under (x, y) -> [x] + [theta y]."""
    if mu2d.dim != 2:
        raise ValueError("push_project needs a planar measure")
    cells = mu2d.cells[:, 0] + theta.scale_floor(mu2d.cells[:, 1])
    extent = (mu2d.extent[0] * 2, mu2d.extent[1] * 2)
    return DeltaMeasure(mu2d.level, cells, mu2d.weights, extent)
