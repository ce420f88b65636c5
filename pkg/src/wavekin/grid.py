"""Uniform frequency grid on [0, omega_max] with composite-trapezoid quadrature.

The half-line integrals of the kinetic operators are all realized as
truncated integrals on [0, omega_max]; the spectrum is treated as exactly
zero beyond the truncation frequency.  Prefix and suffix integrals land
exactly on grid nodes, so every operator is evaluated at nodes only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform nodes i*h on [0, omega_max] with trapezoid weights (h/2, h, ..., h, h/2)."""

    omega_max: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.omega_max / (self.n - 1)


def build_uniform_grid(omega_max: float, n: int) -> FrequencyGrid:
    if n < 2:
        raise ValidationError(f"grid needs at least 2 nodes, got n={n}")
    if not omega_max > 0:
        raise ValidationError(f"omega_max must be positive, got {omega_max}")
    h = omega_max / (n - 1)
    nodes = np.arange(n, dtype=float) * h
    # force the endpoints to be exact
    nodes[-1] = omega_max
    weights = np.full(n, h)
    weights[0] = weights[-1] = 0.5 * h
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return FrequencyGrid(omega_max=float(omega_max), n=int(n), nodes=nodes, weights=weights)


def _check_length(values: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ValidationError(
            f"values has shape {values.shape}, expected ({grid.n},)"
        )
    return values


def _check_index(k: int, grid: FrequencyGrid) -> int:
    k = int(k)
    if not 0 <= k <= grid.n - 1:
        raise ValidationError(f"node index {k} out of range [0, {grid.n - 1}]")
    return k


def integrate_full(values: np.ndarray, grid: FrequencyGrid) -> float:
    """Trapezoid value of the integral over the whole truncated domain."""
    values = _check_length(values, grid)
    return float(np.dot(grid.weights, values))


def integrate_prefix(values: np.ndarray, grid: FrequencyGrid, k: int) -> float:
    """Trapezoid value of the integral from 0 to nodes[k]; zero at k=0."""
    values = _check_length(values, grid)
    k = _check_index(k, grid)
    if k == 0:
        return 0.0
    h = grid.h
    return float(h * (np.sum(values[: k + 1]) - 0.5 * (values[0] + values[k])))


def integrate_suffix(values: np.ndarray, grid: FrequencyGrid, k: int) -> float:
    """Trapezoid value of the integral from nodes[k] to omega_max; zero at k=n-1."""
    values = _check_length(values, grid)
    k = _check_index(k, grid)
    if k == grid.n - 1:
        return 0.0
    h = grid.h
    return float(h * (np.sum(values[k:]) - 0.5 * (values[k] + values[-1])))


def prefix_integrals(values: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """All prefix integrals at once: out[k] = integrate_prefix(values, grid, k)."""
    values = _check_length(values, grid)
    h = grid.h
    out = np.empty(grid.n)
    out[0] = 0.0
    np.cumsum(0.5 * h * (values[1:] + values[:-1]), out=out[1:])
    return out


def suffix_integrals(values: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """All suffix integrals: out[k] = integrate_suffix(values, grid, k)."""
    pre = prefix_integrals(values, grid)
    return pre[-1] - pre


def shifted_values(values: np.ndarray, grid: FrequencyGrid, k: int) -> np.ndarray:
    """Sample values at nodes shifted up by k steps; zero beyond the truncation edge."""
    values = _check_length(values, grid)
    k = _check_index(k, grid)
    out = np.zeros(grid.n)
    if k == 0:
        out[:] = values
    else:
        out[: grid.n - k] = values[k:]
    return out
