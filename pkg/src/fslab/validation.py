"""Small argument checkers shared by the public functions and estimators."""

from __future__ import annotations

from fractions import Fraction
from numbers import Integral, Real

import numpy as np

from fslab.config import max_level


def check_level(value, name: str = "level", allow_negative: bool = False) -> int:
    if isinstance(value, bool) or not isinstance(value, (Integral, np.integer)):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < 0 and not allow_negative:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    if abs(value) > max_level():
        raise ValueError(f"{name}={value} exceeds the configured maximum level {max_level()}")
    return value


def check_fraction(value, name: str) -> Fraction:
    """Accept ints, Fractions, decimal strings like '1/4' and floats (converted exactly)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (Integral, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (Real, np.floating)):
        if not np.isfinite(value):
            raise ValueError(f"{name} must be finite")
        return Fraction(float(value))
    raise TypeError(f"{name} must be a rational number, got {type(value).__name__}")


def check_exponent(value, name: str, low: float = 0.0, high: float = 2.0,
                   include_low: bool = True) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if value < low or value > high or (value == low and not include_low):
        bracket = "[" if include_low else "("
        raise ValueError(f"{name}={value} outside {bracket}{low}, {high}]")
    return value


def check_probability(value, name: str = "probability") -> float:
    value = float(value)
    if not 0.0 < value <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {value}")
    return value


def check_cells_1d(cells) -> np.ndarray:
    arr = np.asarray(cells, dtype=np.int64).reshape(-1)
    return np.unique(arr)


def check_cells_2d(cells) -> np.ndarray:
    arr = np.asarray(cells, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"2D cells must have shape (n, 2), got {arr.shape}")
    return np.unique(arr, axis=0)
