"""Interaction operators of the coagulation-fragmentation wave-kinetic model.

Implements the three quadratic operators (energy transfer and the two
back-scattering forms) for general nonnegative kernels, and the two
right-hand sides of the constant-kernel back-scattering equation with a
nonnegative source:

* ``eval_rhs_eq1`` -- the primitive form with separate prefix/suffix loss
  and gain integrals,
* ``eval_rhs_eq2`` -- the rewritten mass-product form N*M + correlation + g.

The shift-correlation integral has a naive O(n^2) evaluator and an FFT
cross-correlation path that reproduces the trapezoid weighting exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError
from .grid import (
    FrequencyGrid,
    integrate_full,
    prefix_integrals,
    shifted_values,
    suffix_integrals,
)

FAST_CORRELATION_CROSSOVER = 256


@dataclass(frozen=True)
class Spectrum:
    """Wave-action density sampled on a frequency grid at one time instant."""

    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValidationError(
                f"spectrum has {values.shape} values for a {self.grid.n}-node grid"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("spectrum contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def mass(self) -> float:
        return integrate_full(self.values, self.grid)

    def check_nonnegative(self, tolerance_factor: float = 1e-12) -> None:
        scale = float(np.max(self.values, initial=0.0))
        if np.min(self.values, initial=0.0) < -tolerance_factor * max(scale, 1.0):
            raise ValidationError("spectrum violates nonnegativity (A2)")


@dataclass(frozen=True)
class Kernel:
    """Interaction kernel: identically 1, or the power law w^a * mu^b."""

    mode: str = "constant_one"
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.mode not in ("constant_one", "power_law"):
            raise ValidationError(f"unknown kernel mode {self.mode!r}")

    def __call__(self, w, mu):
        if self.mode == "constant_one":
            return np.ones(np.broadcast_shapes(np.shape(w), np.shape(mu)))
        w = np.asarray(w, dtype=float)
        mu = np.asarray(mu, dtype=float)
        return _safe_pow(w, self.a) * _safe_pow(mu, self.b)


def _safe_pow(x: np.ndarray, e: float) -> np.ndarray:
    if e == 0.0:
        return np.ones_like(x)
    return np.power(x, e)


@dataclass(frozen=True)
class SourceTerm:
    """Nonnegative forcing g_w(t): zero, separable A*exp(-rate*w)*h(t), or tabulated.

    The separable time profile is either a constant level c >= 0 or an
    exponential decay exp(-sigma*t).  A tabulated source holds per-node
    samples at time breakpoints with piecewise-constant (step) interpolation.
    """

    family: str = "zero"
    amplitude: float = 0.0
    rate: float = 1.0
    profile: str = "constant"
    level: float = 1.0
    sigma: float = 1.0
    table_times: Optional[np.ndarray] = field(default=None, repr=False)
    table_values: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in ("zero", "separable", "tabulated"):
            raise ValidationError(f"unknown source family {self.family!r}")
        if self.family == "separable":
            if self.amplitude < 0:
                raise ValidationError("A2: source amplitude must be nonnegative")
            if not self.rate > 0:
                raise ValidationError("A4: separable source needs rate > 0")
            if self.profile not in ("constant", "exp_decay"):
                raise ValidationError(f"unknown time profile {self.profile!r}")
            if self.profile == "constant" and self.level < 0:
                raise ValidationError("A2: source time level must be nonnegative")
        if self.family == "tabulated":
            times = np.asarray(self.table_times, dtype=float)
            values = np.asarray(self.table_values, dtype=float)
            if times.ndim != 1 or values.ndim != 2 or values.shape[0] != times.size:
                raise ValidationError("tabulated source needs times[T] and values[T, n]")
            if np.any(np.diff(times) <= 0):
                raise ValidationError("tabulated source times must be increasing")
            if not np.all(np.isfinite(values)):
                raise ValidationError("A4: tabulated source has non-finite samples")
            if np.min(values, initial=0.0) < 0:
                raise ValidationError("A2: tabulated source has negative samples")
            object.__setattr__(self, "table_times", times)
            object.__setattr__(self, "table_values", values)

    @staticmethod
    def zero() -> "SourceTerm":
        return SourceTerm(family="zero")

    @staticmethod
    def separable(amplitude: float, rate: float, profile: str = "constant",
                  level: float = 1.0, sigma: float = 1.0) -> "SourceTerm":
        return SourceTerm(family="separable", amplitude=amplitude, rate=rate,
                          profile=profile, level=level, sigma=sigma)

    @staticmethod
    def tabulated(times, values) -> "SourceTerm":
        return SourceTerm(family="tabulated", table_times=times, table_values=values)

    def _profile_at(self, t: float) -> float:
        if self.profile == "constant":
            return self.level
        return float(np.exp(-self.sigma * t))

    def values_at(self, grid: FrequencyGrid, t: float) -> np.ndarray:
        """Per-node source values g_w(t)."""
        if self.family == "zero":
            return np.zeros(grid.n)
        if self.family == "separable":
            return self.amplitude * self._profile_at(t) * np.exp(-self.rate * grid.nodes)
        if self.table_values.shape[1] != grid.n:
            raise ValidationError(
                f"tabulated source has {self.table_values.shape[1]} nodes, grid has {grid.n}"
            )
        idx = int(np.searchsorted(self.table_times, t, side="right")) - 1
        idx = max(idx, 0)
        return self.table_values[idx].copy()

    def mass_rate(self, grid: FrequencyGrid, t: float) -> float:
        """Total injection rate g(t): the frequency integral of g_w(t)."""
        if self.family == "zero":
            return 0.0
        return integrate_full(self.values_at(grid, t), grid)

    def is_zero(self) -> bool:
        if self.family == "zero":
            return True
        if self.family == "separable":
            return self.amplitude == 0.0 or (self.profile == "constant" and self.level == 0.0)
        return bool(np.all(self.table_values == 0.0))


def _check_finite(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise ValidationError("operator input contains non-finite values")
    return values


def _trap_head(integrand: np.ndarray, h: float) -> float:
    """Trapezoid over the uniform sub-range spanned by the full integrand array."""
    if integrand.size < 2:
        return 0.0
    return float(h * (np.sum(integrand) - 0.5 * (integrand[0] + integrand[-1])))


def eval_S1(spec: Spectrum, K: Kernel) -> np.ndarray:
    """Energy-transfer operator: pair coagulation gain minus the two loss integrals."""
    N = _check_finite(spec.values)
    grid = spec.grid
    nodes, h, n = grid.nodes, grid.h, grid.n
    out = np.empty(n)
    for k in range(n):
        j = np.arange(k + 1)
        gain = _trap_head(K(nodes[k - j], nodes[j]) * N[j] * N[k - j], h)
        j2 = np.arange(k, n)
        loss_back = _trap_head(K(nodes[j2 - k], nodes[k]) * N[k] * N[j2 - k], h)
        loss_all = integrate_full(K(nodes[k], nodes) * N[k] * N, grid)
        out[k] = gain - loss_back - loss_all
    return out


def eval_S2(spec: Spectrum, K: Kernel) -> np.ndarray:
    """First back-scattering operator."""
    N = _check_finite(spec.values)
    grid = spec.grid
    nodes, h, n = grid.nodes, grid.h, grid.n
    out = np.empty(n)
    for k in range(n):
        j = np.arange(k + 1)
        loss = _trap_head(K(nodes[j], nodes[k - j]) * N[k] * N[j], h)
        j2 = np.arange(k, n)
        gain_hi = _trap_head(K(nodes[k], nodes[j2 - k]) * N[j2] * N[j2 - k], h)
        shifted = shifted_values(N, grid, k)
        gain_corr = integrate_full(K(nodes[k], nodes) * shifted * N, grid)
        out[k] = -loss + gain_hi + gain_corr
    return out


def eval_S3(spec: Spectrum, K: Kernel) -> np.ndarray:
    """Second back-scattering operator; the constant-kernel case is the solved equation."""
    N = _check_finite(spec.values)
    grid = spec.grid
    nodes, h, n = grid.nodes, grid.h, grid.n
    out = np.empty(n)
    for k in range(n):
        j = np.arange(k + 1)
        loss = _trap_head(K(nodes[j], nodes[k - j]) * N[k] * N[k - j], h)
        j2 = np.arange(k, n)
        gain_hi = _trap_head(K(nodes[j2], nodes[j2 - k]) * N[k] * N[j2], h)
        shifted = shifted_values(N, grid, k)
        gain_corr = integrate_full(K(nodes, nodes[k]) * shifted * N, grid)
        out[k] = -loss + gain_hi + gain_corr
    return out


def eval_Q(spec: Spectrum, K1: Kernel, K2: Kernel, K3: Kernel) -> np.ndarray:
    """Sum of the three interaction operators."""
    return eval_S1(spec, K1) + eval_S2(spec, K2) + eval_S3(spec, K3)


def shift_correlation_naive(spec: Spectrum) -> np.ndarray:
    """Correlation integral C(w_k) = sum_j weights[j] * N[k+j] * N[j], O(n^2)."""
    N = _check_finite(spec.values)
    return _correlation_naive(N, spec.grid)


def _correlation_naive(values: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    n = grid.n
    weighted = grid.weights * values
    out = np.empty(n)
    for k in range(n):
        out[k] = np.dot(weighted[: n - k], values[k:])
    return out


def shift_correlation_fast(spec: Spectrum, crossover: int = FAST_CORRELATION_CROSSOVER) -> np.ndarray:
    """Same correlation via FFT cross-correlation; falls back to naive below crossover."""
    N = _check_finite(spec.values)
    return _correlation_fast(N, spec.grid, crossover)


def _correlation_fast(values: np.ndarray, grid: FrequencyGrid, crossover: int = FAST_CORRELATION_CROSSOVER) -> np.ndarray:
    n = grid.n
    if n < crossover:
        return _correlation_naive(values, grid)
    # weights folded into one factor, so the trapezoid end-point halving is exact
    weighted = grid.weights * values
    m = 1
    while m < 2 * n:
        m <<= 1
    U = np.fft.rfft(values, m)
    V = np.fft.rfft(weighted, m)
    corr = np.fft.irfft(U * np.conj(V), m)[:n]
    return corr


def eval_rhs_eq1(spec: Spectrum, src: SourceTerm, t: float,
                 fast: bool = True) -> np.ndarray:
    """Primitive right-hand side: -N*prefix + N*suffix + correlation + source."""
    N = _check_finite(spec.values)
    grid = spec.grid
    pre = prefix_integrals(N, grid)
    suf = pre[-1] - pre
    corr = _correlation_fast(N, grid) if fast else _correlation_naive(N, grid)
    return N * (suf - pre) + corr + src.values_at(grid, t)


def eval_rhs_eq2(spec: Spectrum, src: SourceTerm, t: float,
                 fast: bool = True) -> np.ndarray:
    """Rewritten right-hand side: N*M + correlation + source."""
    N = _check_finite(spec.values)
    grid = spec.grid
    M = integrate_full(N, grid)
    corr = _correlation_fast(N, grid) if fast else _correlation_naive(N, grid)
    return N * M + corr + src.values_at(grid, t)


RHS_FORMS = ("eq1", "eq2", "s1", "s2", "s3", "full")


def make_rhs(form: str, src: SourceTerm, kernels: Optional[tuple] = None
             ) -> Callable[[FrequencyGrid, np.ndarray, float], np.ndarray]:
    """Right-hand-side evaluator on raw arrays for the time integrator.

    ``kernels`` is a (K1, K2, K3) triple, required by the exploratory
    operator forms s1/s2/s3/full; eq1 and eq2 always use the constant kernel.
    """
    if form not in RHS_FORMS:
        raise ValidationError(f"unknown rhs form {form!r}")

    if form == "eq2":
        def rhs(grid, values, t):
            M = float(np.dot(grid.weights, values))
            return values * M + _correlation_fast(values, grid) + src.values_at(grid, t)
        return rhs
    if form == "eq1":
        def rhs(grid, values, t):
            pre = prefix_integrals(values, grid)
            return (values * (pre[-1] - 2.0 * pre)
                    + _correlation_fast(values, grid) + src.values_at(grid, t))
        return rhs

    if kernels is None:
        kernels = (Kernel(), Kernel(), Kernel())
    K1, K2, K3 = kernels
    ops = {"s1": lambda s: eval_S1(s, K1),
           "s2": lambda s: eval_S2(s, K2),
           "s3": lambda s: eval_S3(s, K3),
           "full": lambda s: eval_Q(s, K1, K2, K3)}
    op = ops[form]

    def rhs(grid, values, t):
        return op(Spectrum(grid=grid, values=values, time=t)) + src.values_at(grid, t)
    return rhs
