"""Small numeric helpers shared across modules."""
from __future__ import annotations

import numpy as np


def cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of y over x, anchored at 0 for the first node.

    Works for y of shape (T,) or (T, n); integration runs along axis 0.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    dx = np.diff(x)
    if y.ndim == 1:
        out = np.empty_like(y)
        out[0] = 0.0
        np.cumsum(0.5 * dx * (y[1:] + y[:-1]), out=out[1:])
        return out
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * dx[:, None] * (y[1:] + y[:-1]), axis=0, out=out[1:])
    return out
