"""Local existence certificates from the generating-function bound.

Given the scalar linear-part mass N(t), the auxiliary quantities are

* psi(t): running integral of N from the segment start a,
* m(t):   exp(psi(t)) * integral of exp(-psi) over [a, t],
* p_w(t): exp(psi(t)) * (N_w(a) + integral of exp(-psi) g_w),

and the mass majorant E(t) solves the quadratic E = P + m E^2, real while
the discriminant 1 - 4 P m stays nonnegative.  The certified horizon b is
the largest time with 4 m P <= 1; chaining segments extends coverage toward
a target time T until it is reached, the run blows up, or progress stalls.

The two sup-type definitions (m and p_w) are evaluated at the right
endpoint; the supremum is attained there because psi is nondecreasing and
every term is nonnegative.  A debug scan over all sample points keeps that
simplification honest.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import CertificateExpiredError, ValidationError
from .grid import FrequencyGrid, integrate_full
from .moments import MomentSeries, RiccatiParams, riccati_numeric
from .operators import SourceTerm, Spectrum
from .timeint import (
    BLOWUP_DETECTED,
    PicardControls,
    StepControls,
    Trajectory,
    integrate_mol,
    picard_solve,
)
from .util import cumtrapz

COVERED = "covered"
BLOWUP = "blowup"
STALLED = "stalled"


def _segment_mesh(n_series: MomentSeries, a: float, t: float):
    """Time mesh [a, ..., t] from the series samples, endpoints interpolated."""
    times = np.asarray(n_series.times, dtype=float)
    values = np.asarray(n_series.values, dtype=float)
    if t < a:
        raise ValidationError(f"need a <= t, got a={a}, t={t}")
    pad = 1e-12 * (1.0 + abs(t))
    if a < times[0] - pad or t > times[-1] + pad:
        raise ValidationError(
            f"[{a}, {t}] outside the series domain [{times[0]}, {times[-1]}]"
        )
    inner = times[(times > a) & (times < t)]
    mesh = np.concatenate(([a], inner, [t]))
    vals = np.interp(mesh, times, values)
    return mesh, vals


def compute_psi(n_series: MomentSeries, a: float, t: float) -> float:
    """Running integral of the scalar mass from a to t."""
    mesh, vals = _segment_mesh(n_series, a, t)
    return float(cumtrapz(vals, mesh)[-1])


def compute_m(n_series: MomentSeries, a: float, t: float,
              debug_sup_scan: bool = False) -> float:
    """exp(psi(t)) times the integral of exp(-psi) over [a, t]."""
    mesh, vals = _segment_mesh(n_series, a, t)
    psi = cumtrapz(vals, mesh)
    integral = cumtrapz(np.exp(-psi), mesh)
    value = float(np.exp(psi[-1]) * integral[-1])
    if debug_sup_scan:
        scan = np.exp(psi) * integral
        sup = float(np.max(scan))
        if sup > value * (1.0 + 1e-12) + 1e-15:
            raise AssertionError(
                f"endpoint simplification failed: sup={sup}, endpoint={value}"
            )
    return value


def compute_p_omega(initial: Spectrum, src: SourceTerm, n_series: MomentSeries,
                    t: float, a: Optional[float] = None,
                    debug_sup_scan: bool = False) -> np.ndarray:
    """Inhomogeneous majorant p_w(t) = e^psi (N_w(a) + int e^-psi g_w)."""
    if a is None:
        a = initial.time
    grid = initial.grid
    mesh, vals = _segment_mesh(n_series, a, t)
    psi = cumtrapz(vals, mesh)
    if src.is_zero():
        cum = np.zeros((mesh.size, grid.n))
    else:
        g_arr = np.stack([src.values_at(grid, s) for s in mesh])
        cum = cumtrapz(np.exp(-psi)[:, None] * g_arr, mesh)
    profile = np.exp(psi)[:, None] * (initial.values[None, :] + cum)
    value = profile[-1]
    if debug_sup_scan:
        sup = np.max(profile, axis=0)
        if np.any(sup > value * (1.0 + 1e-12) + 1e-15):
            raise AssertionError("endpoint simplification failed for p_w")
    return value


def compute_P_total(p_omega_values: np.ndarray, grid: FrequencyGrid) -> float:
    """Total mass P(t, 1) of the inhomogeneous majorant."""
    return integrate_full(p_omega_values, grid)


def p_total_bound(initial: Spectrum, src: SourceTerm, n_series: MomentSeries,
                  t: float, a: Optional[float] = None) -> float:
    """Analytic upper bound X(a) e^psi + e^psi int g for cross-checking P(t, 1)."""
    if a is None:
        a = initial.time
    grid = initial.grid
    mesh, vals = _segment_mesh(n_series, a, t)
    psi_end = cumtrapz(vals, mesh)[-1]
    g_scalar = np.array([src.mass_rate(grid, s) for s in mesh])
    g_int = cumtrapz(g_scalar, mesh)[-1]
    x_a = integrate_full(initial.values, grid)
    return float(np.exp(psi_end) * (x_a + g_int))


def mass_bound(P: float, m: float) -> float:
    """Minus branch of the quadratic majorant mass E = (1 - sqrt(1-4Pm)) / (2m).

    The minus branch is forced by the m -> 0 limit, where the bound must
    reduce to the inhomogeneous mass P.
    """
    if m < 0:
        raise ValidationError(f"m must be nonnegative, got {m}")
    if m == 0.0:
        return float(P)
    disc = 1.0 - 4.0 * P * m
    if disc < 0:
        raise CertificateExpiredError(disc)
    return float((1.0 - np.sqrt(disc)) / (2.0 * m))


def local_horizon(a: float, initial: Spectrum, src: SourceTerm,
                  n_series: MomentSeries, t_max: float,
                  resolution: float = 1e-6) -> float:
    """Largest b <= t_max with 4 m(t) P(t, 1) <= 1, by bisection on the product."""
    if not t_max > a:
        raise ValidationError(f"need t_max > a, got a={a}, t_max={t_max}")
    times = np.asarray(n_series.times, dtype=float)
    if times.size < 2:
        raise ValidationError("degenerate scalar mass series")
    grid = initial.grid

    def excess(t: float) -> float:
        m = compute_m(n_series, a, t)
        P = compute_P_total(compute_p_omega(initial, src, n_series, t, a=a), grid)
        return 4.0 * m * P - 1.0

    if excess(t_max) <= 0.0:
        return float(t_max)
    lo, hi = a, t_max
    tol = resolution * (t_max - a)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return float(lo)


@dataclass
class ExistenceCertificate:
    a: float
    b: float
    times: np.ndarray
    psi: np.ndarray
    m: np.ndarray
    p_total: np.ndarray
    discriminant: np.ndarray
    mass_bound: np.ndarray
    source_mass_integral: np.ndarray


def build_certificate(initial: Spectrum, src: SourceTerm, n_series: MomentSeries,
                      a: float, b: float, sample_times: np.ndarray) -> ExistenceCertificate:
    """Evaluate all certificate quantities at the given sample times in [a, b]."""
    grid = initial.grid
    sample_times = np.asarray(sample_times, dtype=float)
    psi = np.empty(sample_times.size)
    m = np.empty(sample_times.size)
    p_tot = np.empty(sample_times.size)
    disc = np.empty(sample_times.size)
    bound = np.empty(sample_times.size)
    g_int = np.empty(sample_times.size)
    for i, t in enumerate(sample_times):
        psi[i] = compute_psi(n_series, a, t)
        m[i] = compute_m(n_series, a, t)
        p_tot[i] = compute_P_total(compute_p_omega(initial, src, n_series, t, a=a), grid)
        mesh, _ = _segment_mesh(n_series, a, t)
        g_scalar = np.array([src.mass_rate(grid, s) for s in mesh])
        g_int[i] = cumtrapz(g_scalar, mesh)[-1]
        d = 1.0 - 4.0 * p_tot[i] * m[i]
        if -1e-12 < d < 0.0:
            d = 0.0
        disc[i] = d
        bound[i] = mass_bound(p_tot[i], m[i]) if d >= 0 else np.nan
    return ExistenceCertificate(a=float(a), b=float(b), times=sample_times,
                                psi=psi, m=m, p_total=p_tot, discriminant=disc,
                                mass_bound=bound, source_mass_integral=g_int)


def band_budgets(initial: Spectrum, src: SourceTerm, n_series: MomentSeries,
                 t: float, a: Optional[float] = None, band_width: float = 1.0):
    """Per-band share of the majorant mass for the tail-summability check.

    The quadratic remainder E - P is distributed across bands in proportion
    to each band's share of the inhomogeneous majorant, so the budgets sum
    to E(t, 1).
    """
    if a is None:
        a = initial.time
    grid = initial.grid
    p_vals = compute_p_omega(initial, src, n_series, t, a=a)
    P = compute_P_total(p_vals, grid)
    E = mass_bound(P, compute_m(n_series, a, t))
    edges = np.arange(0.0, grid.omega_max + band_width, band_width)
    band_idx = np.clip(np.digitize(grid.nodes, edges) - 1, 0, edges.size - 2)
    n_bands = edges.size - 1
    p_bands = np.zeros(n_bands)
    wp = grid.weights * p_vals
    np.add.at(p_bands, band_idx, wp)
    if P <= 0.0:
        budgets = np.zeros(n_bands)
    else:
        budgets = p_bands * (E / P)
    return edges, band_idx, budgets


def band_masses(spec: Spectrum, band_idx: np.ndarray, n_bands: int) -> np.ndarray:
    """Quadrature mass of the spectrum accumulated per frequency band."""
    out = np.zeros(n_bands)
    np.add.at(out, band_idx, spec.grid.weights * spec.values)
    return out


@dataclass
class HorizonChain:
    certificates: List[ExistenceCertificate]
    trajectories: List[Trajectory]
    covered: float
    outcome: str


def global_horizon(T: float, initial: Spectrum, src: SourceTerm, kappa: float,
                   dt: float = 1e-3, dt_min: float = 1e-9,
                   blowup_threshold: float = 1e6, store_every: int = 1,
                   clamp_negative: bool = True, form: str = "eq2",
                   advance: str = "mol", picard_tol: float = 1e-8,
                   picard_max_iter: int = 60, picard_time_nodes: int = 201,
                   stall_fraction: float = 1e-8,
                   max_segments: int = 10_000,
                   cert_samples: int = 33) -> HorizonChain:
    """Chain local horizons to cover [start, T], advancing the solution per segment."""
    if not T > initial.time:
        raise ValidationError(f"T={T} must exceed the start time {initial.time}")
    if advance not in ("mol", "picard"):
        raise ValidationError(f"unknown advance mode {advance!r}")
    grid = initial.grid
    certificates: List[ExistenceCertificate] = []
    trajectories: List[Trajectory] = []
    spec = initial
    a = initial.time
    outcome = COVERED
    while a < T - 1e-14 * max(1.0, T):
        n0 = integrate_full(spec.values, grid)
        params = RiccatiParams(kappa=kappa, n0=n0,
                               g=lambda t: src.mass_rate(grid, t))
        series = riccati_numeric(params, t_end=T, dt=min(dt, (T - a) / 64.0),
                                 blowup_threshold=blowup_threshold, t0=a)
        t_max = min(T, float(series.times[-1]))
        if t_max <= a + stall_fraction * T:
            outcome = BLOWUP if series.blowup_time is not None else STALLED
            break
        b = local_horizon(a, spec, src, series, t_max)
        if b - a < stall_fraction * T:
            # horizon increments collapse when the scalar mass is about to diverge
            outcome = BLOWUP if series.blowup_time is not None else STALLED
            break
        if advance == "mol":
            controls = StepControls(dt=dt, t_end=b, dt_min=dt_min,
                                    blowup_threshold=blowup_threshold,
                                    clamp_negative=clamp_negative,
                                    store_every=store_every)
            traj = integrate_mol(spec, src, form, controls)
        else:
            pc = PicardControls(a=a, b=b, tol=picard_tol,
                                max_iter=picard_max_iter,
                                time_nodes=picard_time_nodes)
            traj = picard_solve(spec, src, series, pc).trajectory
        sample_times = traj.times
        if sample_times.size > cert_samples:
            pick = np.unique(np.linspace(0, sample_times.size - 1, cert_samples).astype(int))
            sample_times = sample_times[pick]
        certificates.append(build_certificate(spec, src, series, a, b, sample_times))
        trajectories.append(traj)
        if traj.termination == BLOWUP_DETECTED:
            outcome = BLOWUP
            a = float(traj.times[-1])
            break
        spec = traj.final_spectrum()
        a = float(traj.times[-1])
        if len(certificates) >= max_segments:
            outcome = STALLED
            break
    return HorizonChain(certificates=certificates, trajectories=trajectories,
                        covered=float(a), outcome=outcome)
