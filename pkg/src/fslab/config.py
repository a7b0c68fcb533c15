"""Process-wide limits read from the environment."""

from __future__ import annotations

import os

DEFAULT_MAX_LEVEL = 30
DEFAULT_EXTENT = (-2, 2)


def max_level() -> int:
    raw = os.environ.get("FSLAB_MAX_LEVEL")
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_LEVEL
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"FSLAB_MAX_LEVEL must be an integer, got {raw!r}") from exc
    if value < 0 or value > 60:
        raise ValueError(f"FSLAB_MAX_LEVEL out of range: {value}")
    return value
