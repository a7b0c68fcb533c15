"""Finite unions of dyadic cells in one and two dimensions.

A cell of level ``L`` with index ``k`` is the half-open interval
``[k 2^-L, (k+1) 2^-L)``; in the plane a cell is a pair ``(i, j)``.  Sets also
carry a real extent ``(lo, hi)`` (integers) that every cell must lie in.
All geometry is integer arithmetic on the indices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from fslab.config import DEFAULT_EXTENT
from fslab.validation import check_cells_1d, check_cells_2d, check_level

log = logging.getLogger(__name__)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def index_range(level: int, extent=DEFAULT_EXTENT) -> tuple[int, int]:
    """Half-open range of admissible indices at ``level``."""
    lo, hi = extent
    return lo << level, hi << level


def _check_extent(extent) -> tuple[int, int]:
    lo, hi = (int(extent[0]), int(extent[1]))
    if lo >= hi:
        raise ValueError(f"empty extent {extent}")
    return lo, hi


@dataclass(frozen=True, eq=False)
class GridSet1D:
    level: int
    cells: np.ndarray
    extent: tuple[int, int] = DEFAULT_EXTENT

    def __post_init__(self):
        check_level(self.level)
        extent = _check_extent(self.extent)
        object.__setattr__(self, "extent", extent)
        cells = check_cells_1d(self.cells)
        lo, hi = index_range(self.level, extent)
        if cells.size and (cells[0] < lo or cells[-1] >= hi):
            raise ValueError(f"cells outside the extent {extent} at level {self.level}")
        object.__setattr__(self, "cells", _readonly(cells))

    @classmethod
    def full(cls, level: int, lo: int = 0, hi: int = 1, extent=DEFAULT_EXTENT) -> "GridSet1D":
        return cls(level, np.arange(lo << level, hi << level, dtype=np.int64), extent)

    @classmethod
    def empty(cls, level: int, extent=DEFAULT_EXTENT) -> "GridSet1D":
        return cls(level, np.empty(0, dtype=np.int64), extent)

    @classmethod
    def from_points(cls, points, level: int, extent=DEFAULT_EXTENT) -> "GridSet1D":
        """Cells containing the given rational points (rounded down to the grid)."""
        scale = 1 << level
        idx = [int((Fraction(p) * scale).__floor__()) for p in points]
        return cls(level, np.asarray(idx, dtype=np.int64), extent)

    def __len__(self) -> int:
        return int(self.cells.size)

    def __iter__(self):
        return iter(self.cells.tolist())

    def __contains__(self, k) -> bool:
        pos = np.searchsorted(self.cells, k)
        return bool(pos < self.cells.size and self.cells[pos] == k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet1D):
            return NotImplemented
        return self.level == other.level and np.array_equal(self.cells, other.cells)

    __hash__ = None

    def __repr__(self) -> str:
        return f"GridSet1D(level={self.level}, n={len(self)})"

    @property
    def mesh(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    def with_cells(self, cells) -> "GridSet1D":
        return GridSet1D(self.level, cells, self.extent)

    def union(self, other: "GridSet1D") -> "GridSet1D":
        _same_level(self, other)
        return self.with_cells(np.union1d(self.cells, other.cells))

    def intersection(self, other: "GridSet1D") -> "GridSet1D":
        _same_level(self, other)
        return self.with_cells(np.intersect1d(self.cells, other.cells))

    def issubset(self, other: "GridSet1D") -> bool:
        _same_level(self, other)
        return bool(np.isin(self.cells, other.cells).all())


class GridSet2D:
    """Common interface of explicit and lazy product planar sets."""

    level: int
    extent: tuple[int, int]

    def explicit(self) -> "ExplicitSet2D":
        raise NotImplementedError

    def __len__(self) -> int:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet2D):
            return NotImplemented
        a, b = self.explicit(), other.explicit()
        return a.level == b.level and np.array_equal(a.cells, b.cells)

    __hash__ = None

    def issubset(self, other: "GridSet2D") -> bool:
        a, b = self.explicit(), other.explicit()
        _same_level(a, b)
        return bool(rows_in(a.cells, b.cells).all())


@dataclass(frozen=True, eq=False)
class ExplicitSet2D(GridSet2D):
    level: int
    cells: np.ndarray
    extent: tuple[int, int] = DEFAULT_EXTENT

    def __post_init__(self):
        check_level(self.level)
        extent = _check_extent(self.extent)
        object.__setattr__(self, "extent", extent)
        cells = check_cells_2d(self.cells)
        lo, hi = index_range(self.level, extent)
        if cells.size and (cells.min() < lo or cells.max() >= hi):
            raise ValueError(f"cells outside the extent {extent} at level {self.level}")
        object.__setattr__(self, "cells", _readonly(cells))

    @classmethod
    def empty(cls, level: int, extent=DEFAULT_EXTENT) -> "ExplicitSet2D":
        return cls(level, np.empty((0, 2), dtype=np.int64), extent)

    def explicit(self) -> "ExplicitSet2D":
        return self

    def __len__(self) -> int:
        return int(self.cells.shape[0])

    def __contains__(self, cell) -> bool:
        probe = np.asarray([cell], dtype=np.int64)
        return bool(rows_in(probe, self.cells)[0])

    def __repr__(self) -> str:
        return f"ExplicitSet2D(level={self.level}, n={len(self)})"

    def with_cells(self, cells) -> "ExplicitSet2D":
        return ExplicitSet2D(self.level, cells, self.extent)


@dataclass(frozen=True, eq=False)
class ProductSet2D(GridSet2D):
    first: GridSet1D
    second: GridSet1D

    def __post_init__(self):
        _same_level(self.first, self.second)
        if self.first.extent != self.second.extent:
            raise ValueError("factors of a product must share their extent")

    @property
    def level(self) -> int:
        return self.first.level

    @property
    def extent(self) -> tuple[int, int]:
        return self.first.extent

    def explicit(self) -> ExplicitSet2D:
        a, b = self.first.cells, self.second.cells
        cells = np.column_stack([np.repeat(a, b.size), np.tile(b, a.size)])
        return ExplicitSet2D(self.level, cells.reshape(-1, 2), self.extent)

    def __len__(self) -> int:
        return len(self.first) * len(self.second)

    def __contains__(self, cell) -> bool:
        i, j = cell
        return i in self.first and j in self.second

    def __repr__(self) -> str:
        return f"ProductSet2D(level={self.level}, {len(self.first)}x{len(self.second)})"


def product(first: GridSet1D, second: GridSet1D) -> ProductSet2D:
    return ProductSet2D(first, second)


def _same_level(a, b) -> None:
    if a.level != b.level:
        raise ValueError(f"level mismatch: {a.level} != {b.level}")


def rows_in(rows: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Boolean mask: which rows of an (n, 2) array occur in another (m, 2) array."""
    rows = np.ascontiguousarray(rows, dtype=np.int64).reshape(-1, 2)
    table = np.ascontiguousarray(table, dtype=np.int64).reshape(-1, 2)
    if rows.shape[0] == 0 or table.shape[0] == 0:
        return np.zeros(rows.shape[0], dtype=bool)
    void = np.dtype((np.void, 16))
    return np.isin(rows.view(void).ravel(), table.view(void).ravel())


# ---------------------------------------------------------------- coverings


def _coarsen(cells: np.ndarray, shift: int) -> np.ndarray:
    # arithmetic right shift is floor division by 2^shift, also for negatives
    return np.unique(cells >> shift)


def covering_cells(S, target: int):
    """Level-``target`` cells meeting ``S``."""
    target = check_level(target, "target")
    if target > S.level:
        raise ValueError("cannot refine without set model")
    shift = S.level - target
    if isinstance(S, GridSet1D):
        return GridSet1D(target, _coarsen(S.cells, shift), S.extent)
    if isinstance(S, ProductSet2D):
        return ProductSet2D(covering_cells(S.first, target), covering_cells(S.second, target))
    cells = S.explicit().cells
    return ExplicitSet2D(target, np.unique(cells >> shift, axis=0), S.extent)


def covering_number(S, target: int) -> int:
    return len(covering_cells(S, target))


# ---------------------------------------------------------------- neighborhoods


def _dilate_sorted(cells: np.ndarray, width: int) -> np.ndarray:
    """All integers within ``width`` of a sorted integer array."""
    if cells.size == 0:
        return cells.copy()
    starts = cells - width
    ends = cells + width + 1
    # merge overlapping [start, end) runs
    new_run = np.empty(cells.size, dtype=bool)
    new_run[0] = True
    new_run[1:] = starts[1:] > ends[:-1]
    run_starts = starts[new_run]
    run_ends = ends[np.r_[new_run[1:], True]]
    lengths = run_ends - run_starts
    offsets = np.repeat(run_starts - np.r_[0, np.cumsum(lengths)[:-1]], lengths)
    return np.arange(int(lengths.sum()), dtype=np.int64) + offsets


def _clip(cells: np.ndarray, level: int, extent) -> np.ndarray:
    lo, hi = index_range(level, extent)
    keep = (cells >= lo) & (cells < hi)
    if keep.ndim == 2:
        keep = keep.all(axis=1)
    if not keep.all():
        log.info("neighborhood clipped %d cells at the extent %s", int((~keep).sum()), extent)
    return cells[keep]


def neighborhood(S, r: int):
    """Cells of ``S.level`` within sup-distance ``2^-r`` of a cell of ``S``.

    Passing ``r=None`` means radius zero and returns ``S`` unchanged.
    """
    if r is None:
        return S
    r = check_level(r, "r")
    if r > S.level:
        raise ValueError("neighborhood radius finer than the set resolution")
    width = 1 << (S.level - r)
    if isinstance(S, GridSet1D):
        cells = _dilate_sorted(S.cells, width)
        return GridSet1D(S.level, _clip(cells, S.level, S.extent), S.extent)
    if isinstance(S, ProductSet2D):
        return ProductSet2D(neighborhood(S.first, r), neighborhood(S.second, r))
    cells = dilate_2d(S.explicit().cells, width)
    return ExplicitSet2D(S.level, _clip(cells, S.level, S.extent), S.extent)


def dilate_2d(cells: np.ndarray, width: int) -> np.ndarray:
    """Sup-norm dilation of planar cells by ``width`` indices, sorted and unique."""
    if cells.shape[0] == 0:
        return cells.reshape(0, 2).copy()
    # dilate along the first axis inside each column, then along the second
    by_column = _dilate_grouped(cells[:, 1], cells[:, 0], width)  # (j, i) pairs
    out = _dilate_grouped(by_column[:, 1], by_column[:, 0], width)
    return np.unique(out, axis=0)


def _dilate_grouped(keys: np.ndarray, values: np.ndarray, width: int) -> np.ndarray:
    """Dilate ``values`` by ``width`` separately inside each ``keys`` group.

    Returns an (n, 2) array of (key, value) pairs.
    """
    order = np.lexsort((values, keys))
    keys, values = keys[order], values[order]
    span = int(values.max()) - int(values.min()) + 2 * width + 2
    base = int(values.min()) - width
    ukeys, inverse = np.unique(keys, return_inverse=True)
    if span * (len(ukeys) + 1) >= 2**62:
        raise OverflowError("set too spread out for grouped dilation")
    packed = inverse.astype(np.int64) * span + (values - base)
    packed = np.unique(packed)
    grown = _dilate_sorted(packed, width)
    group = grown // span
    return np.column_stack([ukeys[group], grown % span + base])


# ---------------------------------------------------------------- rescaling


@dataclass(frozen=True)
class RescaleMap:
    """The map z -> (z - z0) / r0 with z0 a grid point and r0 = 2^-scale_level.

    ``shift`` holds the per-axis numerators of z0 over ``2^shift_level``.  A
    negative ``scale_level`` shrinks sets instead of magnifying them.
    """

    shift: tuple[int, ...]
    shift_level: int
    scale_level: int

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(int(s) for s in self.shift))
        check_level(self.shift_level, "shift_level")
        check_level(self.scale_level, "scale_level", allow_negative=True)

    @classmethod
    def identity(cls, dim: int = 1) -> "RescaleMap":
        return cls((0,) * dim, 0, 0)

    @property
    def z0(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(s, 1 << self.shift_level) for s in self.shift)

    @property
    def r0(self) -> Fraction:
        return Fraction(2) ** (-self.scale_level)

    def inverse(self) -> "RescaleMap":
        # T^-1(w) = (w - z0') / r0' with z0' = -z0 / r0 and r0' = 1 / r0
        level = self.shift_level - self.scale_level
        if level >= 0:
            shift = tuple(-s for s in self.shift)
        else:
            shift = tuple(-s << -level for s in self.shift)
            level = 0
        return RescaleMap(shift, level, -self.scale_level)

    def apply_point(self, point) -> tuple[Fraction, ...]:
        scale = Fraction(2) ** self.scale_level
        return tuple((Fraction(p) - z) * scale for p, z in zip(point, self.z0))

    def _shift_at(self, level: int, axis: int) -> int:
        if level < self.shift_level:
            raise ValueError("rescaling centre is not a grid point of the set's level")
        return self.shift[axis] << (level - self.shift_level)


def rescale(S, T: RescaleMap):
    """Exact image of a grid set; level drops by ``T.scale_level``."""
    new_level = S.level - T.scale_level
    if new_level < 0:
        raise ValueError("rescaled level would be negative")
    check_level(new_level, "rescaled level")
    if isinstance(S, GridSet1D):
        cells = S.cells - T._shift_at(S.level, 0)
        return _in_extent(GridSet1D, new_level, cells, S.extent)
    if len(T.shift) != 2:
        raise ValueError("planar rescaling needs a two-coordinate centre")
    if isinstance(S, ProductSet2D):
        first = RescaleMap((T.shift[0],), T.shift_level, T.scale_level)
        second = RescaleMap((T.shift[1],), T.shift_level, T.scale_level)
        return ProductSet2D(rescale(S.first, first), rescale(S.second, second))
    offset = np.array([T._shift_at(S.level, 0), T._shift_at(S.level, 1)], dtype=np.int64)
    cells = S.explicit().cells - offset
    return _in_extent(ExplicitSet2D, new_level, cells, S.extent)


def _in_extent(kind, level, cells, extent):
    lo, hi = index_range(level, extent)
    if cells.size and (cells.min() < lo or cells.max() >= hi):
        raise ValueError("rescaled set leaves the representable extent")
    return kind(level, cells, extent)


# ---------------------------------------------------------------- directions


@dataclass(frozen=True)
class Direction:
    """A dyadic slope ``numerator / 2^level`` in [0, 1]."""

    numerator: int
    level: int

    def __post_init__(self):
        object.__setattr__(self, "numerator", int(self.numerator))
        check_level(self.level, "theta level")
        if not 0 <= self.numerator <= (1 << self.level):
            raise ValueError(f"direction {self.numerator}/2^{self.level} outside [0, 1]")

    @classmethod
    def from_value(cls, value, level: int | None = None) -> "Direction":
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        own = den.bit_length() - 1
        level = own if level is None else level
        if level < own:
            raise ValueError(f"{value} needs at least {own} binary digits")
        return cls(value.numerator << (level - own), level)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.level)

    def __float__(self) -> float:
        return self.numerator / (1 << self.level)

    def scale_floor(self, cells: np.ndarray) -> np.ndarray:
        """Indices of the cells containing theta times each grid point."""
        return (np.asarray(cells, dtype=np.int64) * self.numerator) >> self.level


def direction_grid(level: int, include_one: bool = False) -> list[Direction]:
    """All directions p / 2^level with p < 2^level (optionally also theta = 1)."""
    check_level(level, "theta level")
    top = (1 << level) + (1 if include_one else 0)
    return [Direction(p, level) for p in range(top)]
