"""Input validation utilities."""

import math
import re
from typing import List, Optional

# Smallest and largest δ the voxel grid supports
DELTA_MIN = 2.0**-12
DELTA_MAX = 2.0**-3


def validate_delta(delta: float) -> bool:
    """Check that δ is a finite scale in [2^-12, 2^-3].

    Args:
        delta: Tube width

    Returns:
        True if valid, False otherwise
    """
    try:
        value = float(delta)
    except (TypeError, ValueError):
        return False
    return math.isfinite(value) and DELTA_MIN <= value <= DELTA_MAX


def validate_lambda(lam: float) -> bool:
    """Check that a shading density lies in (0, 1]."""
    try:
        value = float(lam)
    except (TypeError, ValueError):
        return False
    return 0.0 < value <= 1.0


def parse_deltas(text: str) -> Optional[List[float]]:
    """Parse a comma-separated δ list such as "2^-4,2^-5,0.01".

    Args:
        text: Comma-separated values; `2^-k` is accepted

    Returns:
        Distinct valid values sorted descending, or None if any entry is invalid
    """
    if not text or not isinstance(text, str):
        return None
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        match = re.fullmatch(r"2\^(-?\d+)", item)
        try:
            value = 2.0 ** int(match.group(1)) if match else float(item)
        except ValueError:
            return None
        if not validate_delta(value):
            return None
        values.append(value)
    if not values:
        return None
    return sorted(set(values), reverse=True)


def validate_keypath(keypath: str) -> bool:
    """Validate a configuration keypath.

    Args:
        keypath: Dot-separated keypath (e.g., "volumes.kappa")

    Returns:
        True if valid keypath format, False otherwise
    """
    if not keypath or not isinstance(keypath, str):
        return False

    pattern = r"^[a-zA-Z_][a-zA-Z0-9_]*(\.[a-zA-Z_][a-zA-Z0-9_]*)*$"
    return bool(re.match(pattern, keypath))
