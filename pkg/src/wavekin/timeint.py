"""Time advancement: explicit RK4 method-of-lines and Duhamel fixed-point iteration.

The method-of-lines driver uses a fixed step with halving on NaN or
negative-mass events (bounded below by dt_min) and halts early when the
total mass crosses a blow-up threshold.  The fixed-point solver iterates
the mild (exponential-integrator) representation of the mass-product form
on a uniform time mesh, with the linear-part mass supplied externally from
the scalar moment equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import StepFailureError, ValidationError
from .grid import FrequencyGrid, integrate_full
from .operators import SourceTerm, Spectrum, _correlation_fast, make_rhs
from .util import cumtrapz

REACHED_T_END = "reached_t_end"
BLOWUP_DETECTED = "blowup_detected"
STEP_UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class StepControls:
    dt: float
    t_end: float
    dt_min: float = 1e-10
    blowup_threshold: float = 1e6
    clamp_negative: bool = True
    store_every: int = 1

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt:
            raise ValidationError(f"need 0 < dt_min <= dt, got dt={self.dt}, dt_min={self.dt_min}")
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        if not self.blowup_threshold > 0:
            raise ValidationError("blowup_threshold must be positive")
        if self.store_every < 1:
            raise ValidationError("store_every must be >= 1")


@dataclass
class Trajectory:
    grid: FrequencyGrid
    times: np.ndarray
    spectra: List[Spectrum]
    mass: np.ndarray
    termination: str
    clamp_events: int = 0

    def final_spectrum(self) -> Spectrum:
        return self.spectra[-1]


@dataclass(frozen=True)
class PicardControls:
    a: float
    b: float
    tol: float = 1e-8
    max_iter: int = 50
    time_nodes: int = 201

    def __post_init__(self):
        if not self.a < self.b:
            raise ValidationError(f"need a < b, got a={self.a}, b={self.b}")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.time_nodes < 2:
            raise ValidationError("time_nodes must be >= 2")


@dataclass
class PicardResult:
    trajectory: Trajectory
    iterations: int
    converged: bool
    residual: float


def _rk4_values(rhs, grid: FrequencyGrid, values: np.ndarray, t: float, dt: float) -> np.ndarray:
    k1 = rhs(grid, values, t)
    k2 = rhs(grid, values + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(grid, values + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(grid, values + dt * k3, t + dt)
    return values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(spec: Spectrum, src: SourceTerm, form: str, dt: float,
             clamp_negative: bool = True) -> Spectrum:
    """One classical 4-stage explicit step of the chosen right-hand-side form."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    rhs = make_rhs(form, src)
    new = _rk4_values(rhs, spec.grid, spec.values, spec.time, dt)
    if not np.all(np.isfinite(new)):
        raise StepFailureError(f"non-finite values after step from t={spec.time}")
    if clamp_negative:
        np.clip(new, 0.0, None, out=new)
    return Spectrum(grid=spec.grid, values=new, time=spec.time + dt)


def integrate_mol(initial: Spectrum, src: SourceTerm, form: str,
                  controls: StepControls, kernels=None) -> Trajectory:
    """Advance the spectrum from initial.time to controls.t_end by method of lines."""
    grid = initial.grid
    rhs = make_rhs(form, src, kernels)
    t = initial.time
    if not controls.t_end > t:
        raise ValidationError(f"t_end={controls.t_end} must exceed the start time {t}")

    values = initial.values.copy()
    times = [t]
    spectra = [Spectrum(grid=grid, values=values.copy(), time=t)]
    masses = [integrate_full(values, grid)]
    clamp_events = 0
    dt = controls.dt
    step_index = 0
    termination = REACHED_T_END

    def record(force: bool = False):
        if force or step_index % controls.store_every == 0:
            if times and times[-1] == t:
                return
            times.append(t)
            spectra.append(Spectrum(grid=grid, values=values.copy(), time=t))
            masses.append(integrate_full(values, grid))

    while t < controls.t_end - 1e-14 * controls.t_end:
        dt_eff = min(dt, controls.t_end - t)
        new = _rk4_values(rhs, grid, values, t, dt_eff)
        bad = not np.all(np.isfinite(new))
        if not bad:
            new_mass = float(np.dot(grid.weights, new))
            bad = not np.isfinite(new_mass) or new_mass < -1e-12 * (1.0 + abs(masses[-1]))
        if bad:
            dt *= 0.5
            if dt < controls.dt_min:
                termination = STEP_UNDERFLOW
                break
            continue
        if controls.clamp_negative:
            negative = new < 0.0
            count = int(np.count_nonzero(negative))
            if count:
                clamp_events += count
                new[negative] = 0.0
                new_mass = float(np.dot(grid.weights, new))
        values = new
        t += dt_eff
        step_index += 1
        record()
        if new_mass >= controls.blowup_threshold:
            termination = BLOWUP_DETECTED
            break

    record(force=True)
    traj = Trajectory(grid=grid, times=np.asarray(times), spectra=spectra,
                      mass=np.asarray(masses), termination=termination,
                      clamp_events=clamp_events)
    return traj


def estimate_blowup_time(traj: Trajectory, tail_samples: int = 8) -> Optional[float]:
    """Extrapolate 1/M(t) linearly to zero over the final mass samples.

    Returns None when the fitted slope is nonnegative (no divergence trend).
    """
    times = np.asarray(traj.times, dtype=float)
    mass = np.asarray(traj.mass, dtype=float)
    if times.size < 3:
        raise ValidationError("need at least 3 mass samples to extrapolate")
    k = min(tail_samples, times.size)
    t = times[-k:]
    m = mass[-k:]
    if np.any(m <= 0):
        return None
    inv = 1.0 / m
    slope, intercept = np.polyfit(t, inv, 1)
    if slope >= 0:
        return None
    return float(-intercept / slope)


def picard_solve(initial: Spectrum, src: SourceTerm, riccati_mass,
                 controls: PicardControls) -> PicardResult:
    """Iterate the mild-form map for the mass-product equation on [a, b].

    ``riccati_mass`` supplies the scalar linear-part mass N(t) on [a, b]
    (a MomentSeries from the moment module); the exponential weight is its
    running integral.  The start iterate keeps only the inhomogeneous part
    (initial value plus source); each sweep adds the correlation of the
    previous iterate, so iterates increase monotonically for nonnegative data.
    """
    grid = initial.grid
    a, b = controls.a, controls.b
    if abs(initial.time - a) > 1e-12 * (1.0 + abs(a)):
        raise ValidationError(f"initial spectrum is at t={initial.time}, controls start at a={a}")
    series_t = np.asarray(riccati_mass.times, dtype=float)
    if series_t[0] > a + 1e-12 or series_t[-1] < b - 1e-12:
        raise ValidationError("riccati mass series does not cover [a, b]")

    tau = np.linspace(a, b, controls.time_nodes)
    n_of_t = np.interp(tau, series_t, np.asarray(riccati_mass.values, dtype=float))
    psi = cumtrapz(n_of_t, tau)
    growth = np.exp(psi)
    decay = np.exp(-psi)

    g_arr = np.stack([src.values_at(grid, t) for t in tau])
    base = growth[:, None] * (initial.values[None, :]
                              + cumtrapz(decay[:, None] * g_arr, tau))

    current = base.copy()
    iterations = 0
    residual = np.inf
    converged = False
    for iterations in range(1, controls.max_iter + 1):
        corr = np.stack([_correlation_fast(current[i], grid) for i in range(tau.size)])
        new = base + growth[:, None] * cumtrapz(decay[:, None] * corr, tau)
        residual = float(np.max(np.abs(new - current)))
        current = new
        if residual <= controls.tol:
            converged = True
            break

    spectra = [Spectrum(grid=grid, values=current[i].copy(), time=tau[i])
               for i in range(tau.size)]
    masses = np.array([integrate_full(current[i], grid) for i in range(tau.size)])
    traj = Trajectory(grid=grid, times=tau, spectra=spectra, mass=masses,
                      termination=REACHED_T_END)
    return PicardResult(trajectory=traj, iterations=iterations,
                        converged=converged, residual=residual)
