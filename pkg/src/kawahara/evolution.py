"""Pseudo-spectral time integration of ``u_t + u^p u_x + u_xxx - mu u_xxxxx = 0``.

In Fourier space ``u_hat' = i(k^3 + mu k^5) u_hat - (i k/(p+1)) F[u^(p+1)]``.
The linear part is integrated exactly by ETDRK4 (Cox-Matthews, with the
Kassam-Trefethen contour evaluation of the phi-functions); the power
nonlinearity is dealiased by zero padding to ``(p+2)N/2`` points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Field, GridSpec, sobolev_weights
from .solitons import SolitonProfile, WaveParams

__all__ = [
    "EvolutionState",
    "StabilityTrace",
    "BlowUpError",
    "ETDRK4",
    "integrator",
    "make_state",
    "step",
    "evolve",
    "conserved",
    "orbital_distance",
    "gaussian_perturbation",
    "stability_experiment",
    "solitary_profile",
    "default_time_step",
    "evolve_backward",
    "time_reversal_error",
]

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e6


class BlowUpError(RuntimeError):
    def __init__(self, message: str, trace: "StabilityTrace | None" = None):
        super().__init__(message)
        self.trace = trace


def conserved(u: Field, params: WaveParams) -> tuple[float, float]:
    """Energy ``int mu u''^2/2 + u'^2/2 - u^(p+2)/((p+1)(p+2))`` and mass ``int u^2/2``."""
    grid = u.grid
    p = params.p
    uh = np.fft.fft(u.values)
    k2 = grid.k ** 2
    scale = grid.spacing / grid.num_points
    quad = 0.5 * float(np.sum((params.mu * k2 * k2 + k2) * np.abs(uh) ** 2)) * scale
    pot = float(np.sum(u.values ** int(p + 2))) * grid.spacing / ((p + 1) * (p + 2))
    mass = 0.5 * float(np.dot(u.values, u.values)) * grid.spacing
    return quad - pot, mass


@dataclass(frozen=True)
class EvolutionState:
    time: float
    u: Field
    energy: float
    mass: float
    params: WaveParams


def make_state(u: Field, params: WaveParams, time: float = 0.0) -> EvolutionState:
    e, v = conserved(u, params)
    return EvolutionState(time, u, e, v, params)


class ETDRK4:
    """Fourth-order exponential integrator on ``rfft`` coefficients."""

    def __init__(self, grid: GridSpec, params: WaveParams, dt: float,
                 nonlinear: bool = True, contour_points: int = 32):
        if not dt > 0:
            raise ValueError("dt must be positive")
        p = params.p
        if float(p) != int(p):
            raise ValueError("time evolution needs an integer power p")
        self.grid, self.params, self.dt = grid, params, dt
        self.p = int(p)
        self.nonlinear = nonlinear
        n = grid.num_points
        k = 2.0 * np.pi * np.fft.rfftfreq(n, d=grid.spacing)
        self.k = k
        lin = 1j * (k ** 3 + params.mu * k ** 5)
        lin[-1] = 0.0  # odd symbol has no Nyquist partner
        self.lin = lin
        self.E = np.exp(dt * lin)
        self.E2 = np.exp(0.5 * dt * lin)
        # full circle: the symbol is imaginary, so the half-circle real-part trick does not apply
        r = np.exp(2j * np.pi * (np.arange(1, contour_points + 1) - 0.5) / contour_points)
        LR = dt * lin[:, None] + r[None, :]
        self.Q = dt * np.mean((np.exp(LR / 2) - 1) / LR, axis=1)
        self.f1 = dt * np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR ** 2)) / LR ** 3, axis=1)
        self.f2 = dt * np.mean((2 + LR + np.exp(LR) * (LR - 2)) / LR ** 3, axis=1)
        self.f3 = dt * np.mean((-4 - 3 * LR - LR ** 2 + np.exp(LR) * (4 - LR)) / LR ** 3, axis=1)
        # zero-padded size resolving the (p+1)-fold product exactly
        m = int(math.ceil((self.p + 2) * n / 2))
        self.pad = m + (m % 2)
        ik = 1j * k
        ik[-1] = 0.0
        self.nl_factor = -ik / (self.p + 1)

    def nonlinear_term(self, vh: np.ndarray) -> np.ndarray:
        if not self.nonlinear:
            return np.zeros_like(vh)
        n, m = self.grid.num_points, self.pad
        padded = np.zeros(m // 2 + 1, dtype=complex)
        padded[: n // 2 + 1] = vh
        padded[n // 2] *= 0.5  # split Nyquist energy between +/- modes
        u = np.fft.irfft(padded, n=m) * (m / n)
        wh = np.fft.rfft(u ** (self.p + 1))[: n // 2 + 1] * (n / m)
        wh[-1] = wh[-1].real
        return self.nl_factor * wh

    def advance(self, vh: np.ndarray) -> np.ndarray:
        N = self.nonlinear_term
        Nv = N(vh)
        a = self.E2 * vh + self.Q * Nv
        Na = N(a)
        b = self.E2 * vh + self.Q * Na
        Nb = N(b)
        c = self.E2 * a + self.Q * (2 * Nb - Nv)
        Nc = N(c)
        return self.E * vh + self.f1 * Nv + 2 * self.f2 * (Na + Nb) + self.f3 * Nc


@lru_cache(maxsize=8)
def integrator(grid: GridSpec, params: WaveParams, dt: float, nonlinear: bool = True) -> ETDRK4:
    return ETDRK4(grid, params, dt, nonlinear)


def step(state: EvolutionState, dt: float, nonlinear: bool = True) -> EvolutionState:
    """One ETDRK4 step of size ``dt``."""
    integ = integrator(state.u.grid, state.params, dt, nonlinear)
    vh = integ.advance(np.fft.rfft(state.u.values))
    u = Field(state.u.grid, np.fft.irfft(vh, n=state.u.grid.num_points))
    return make_state(u, state.params, state.time + dt)


def evolve(u0: Field, params: WaveParams, dt: float, t_end: float,
           sample_every: float | None = None, callback=None, nonlinear: bool = True
           ) -> EvolutionState:
    """Integrate to ``t_end``; ``callback(t, field)`` runs at t=0 and every sample."""
    n_steps = int(round(t_end / dt))
    if n_steps < 0 or abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a nonnegative multiple of dt")
    every = n_steps if sample_every is None else max(1, int(round(sample_every / dt)))
    integ = integrator(u0.grid, params, dt, nonlinear)
    n = u0.grid.num_points
    vh = np.fft.rfft(u0.values)
    limit = BLOWUP_FACTOR * max(float(np.max(np.abs(u0.values))), 1e-300)
    if callback:
        callback(0.0, u0)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_steps + 1):
            vh = integ.advance(vh)
            # sup|u| <= (2/N) sum |u_hat|: cheap per-step guard, exact check when it trips
            bound = 2.0 * float(np.sum(np.abs(vh))) / n
            sample = callback is not None and i % every == 0
            if sample or not bound <= limit:
                u = np.fft.irfft(vh, n=n)
                peak = float(np.max(np.abs(u)))
                if not math.isfinite(peak) or peak > limit:
                    raise BlowUpError(f"blow-up at t={i * dt:.6g}: sup|u|={peak:.3e}")
                if sample:
                    callback(i * dt, Field(u0.grid, u))
    return make_state(Field(u0.grid, np.fft.irfft(vh, n=n)), params, n_steps * dt)


def _shifted_hat(fh: np.ndarray, k: np.ndarray, z: float) -> np.ndarray:
    n = fh.size
    out = fh * np.exp(-1j * k * z)
    out[n // 2] = fh[n // 2] * math.cos(k[n // 2] * z)
    return out


def orbital_distance(u: Field, phi: SolitonProfile | Field, s: int = 2,
                     newton_tol: float = 1e-13) -> tuple[float, float]:
    """``min_z ||translate(u, z) - phi||_{H^s}`` and its minimizer ``z``.

    ``translate(u, z)(x) = u(x - z)``.  The coarse optimum comes from the
    weighted cross-correlation evaluated by one FFT on the shifts ``z = j h``;
    Newton on the analytic derivative of the correlation refines it.
    """
    target = phi.field if isinstance(phi, SolitonProfile) else phi
    if target.grid != u.grid:
        raise ValueError("orbital_distance needs fields on the same grid")
    grid = u.grid
    n, h, L = grid.num_points, grid.spacing, grid.half_length
    k = grid.k
    w = sobolev_weights(grid, s)
    uh = np.fft.fft(u.values)
    ph = np.fft.fft(target.values)
    a = w * uh * np.conj(ph)
    # R(z) = Re sum_k a_k exp(-i k z); at z_j = j h this is fft(a)[j]
    corr = np.fft.fft(a).real
    j = int(np.argmax(corr))
    z = j * h
    if z >= L:
        z -= 2 * L
    for _ in range(50):
        e = np.exp(-1j * k * z)
        d1 = float(np.sum((-1j * k) * a * e).real)
        d2 = float(np.sum(-(k ** 2) * a * e).real)
        if d2 >= 0:
            break
        dz = -d1 / d2
        dz = max(-h, min(h, dz))
        z += dz
        if abs(dz) < newton_tol:
            break
    diff = _shifted_hat(uh, k, z) - ph
    dist = math.sqrt(float(np.sum(w * np.abs(diff) ** 2)) * h / n)
    return dist, float(z)


@dataclass
class StabilityTrace:
    times: list[float] = field(default_factory=list)
    orbital_distances: list[float] = field(default_factory=list)
    best_shifts: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    masses: list[float] = field(default_factory=list)
    energy_drift: float = 0.0
    mass_drift: float = 0.0
    delta: float = 0.0
    label: str = ""

    @property
    def sup_distance(self) -> float:
        return max(self.orbital_distances) if self.orbital_distances else float("nan")

    def measured_speed(self, half_length: float) -> float:
        """Slope of the unwrapped shifts; a right-moving wave gives ``z = -c t``."""
        z = np.unwrap(np.asarray(self.best_shifts) * (np.pi / half_length)) * (half_length / np.pi)
        slope = np.polyfit(np.asarray(self.times), z, 1)[0]
        return float(-slope)

    def rows(self):
        return zip(self.times, self.orbital_distances, self.best_shifts, self.energies, self.masses)


def gaussian_perturbation(grid: GridSpec, width: float) -> Field:
    """Even Gaussian bump normalized to unit ``H^2`` norm."""
    g = Field(grid, np.exp(-(grid.x / width) ** 2))
    fh = np.fft.fft(g.values)
    norm = math.sqrt(float(np.sum(sobolev_weights(grid, 2) * np.abs(fh) ** 2)) * grid.spacing / grid.num_points)
    return g * (1.0 / norm)


def _h2_normalize(f: Field) -> Field:
    fh = np.fft.fft(f.values)
    grid = f.grid
    norm = math.sqrt(float(np.sum(sobolev_weights(grid, 2) * np.abs(fh) ** 2)) * grid.spacing / grid.num_points)
    return f * (1.0 / norm)


def solitary_profile(p: int, branch: str, c_or_mu: float, grid: GridSpec | None = None
                     ) -> SolitonProfile:
    """Profile on the explicit branch (``mu = 1``, speed ``c``) or the slow branch (``c = 1``, ``mu``)."""
    from .continuation import newton_continue
    from .groundstate import MinimizationProblem, minimize
    from .solitons import critical_speed, explicit_gkw_soliton

    if branch == "explicit":
        seed = explicit_gkw_soliton(p, grid)
        if math.isclose(c_or_mu, critical_speed(p), rel_tol=1e-14):
            return seed
        steps = max(1, int(math.ceil(abs(c_or_mu / seed.params.c - 1) / 0.02)))
        br = newton_continue(seed, c_or_mu, steps, with_margin=False)
        if br.failed:
            raise RuntimeError(f"continuation to c={c_or_mu} failed: {br.message}")
        return br[-1].profile
    if branch == "slow":
        res = minimize(MinimizationProblem(p, c_or_mu, grid=grid))
        return res.profile()
    raise ValueError(f"unknown branch {branch!r}")


def stability_experiment(p: int, branch: str, c_or_mu: float, delta: float, horizon: float,
                         dt: float | None = None, sample_every: float = 1.0,
                         perturbation: str = "gaussian", grid: GridSpec | None = None,
                         profile: SolitonProfile | None = None) -> StabilityTrace:
    """Evolve ``phi + delta * g`` and record the orbital distance to ``phi``.

    ``g`` is a unit-``H^2`` even Gaussian, or the negative-eigenvalue
    eigenfunction of the linearized operator with ``perturbation="eigenfunction"``.
    The trace covers ``[0, horizon]`` only.
    """
    from .linop import assemble, bottom_spectrum

    prof = profile or solitary_profile(p, branch, c_or_mu, grid)
    if delta > 0.1 * prof.amplitude:
        raise ValueError("delta must not exceed 0.1 x profile amplitude")
    g = prof.grid
    if perturbation == "gaussian":
        width = 2.0 / prof.decay_scale if math.isfinite(prof.decay_scale) else 2.0
        bump = gaussian_perturbation(g, width)
    elif perturbation == "eigenfunction":
        spec = bottom_spectrum(assemble(prof), 3)
        bump = _h2_normalize(spec.eigenfunctions[0])
    else:
        raise ValueError(f"unknown perturbation {perturbation!r}")
    u0 = prof.field + delta * bump
    if dt is None:
        dt = default_time_step(prof)
    trace = StabilityTrace(delta=delta)
    trace.label = (f"stable up to T={horizon:g}" if p <= 4
                   else f"outside proven regime (p={p}); observed up to T={horizon:g}")

    def record(t, u):
        d, z = orbital_distance(u, prof)
        e, v = conserved(u, prof.params)
        trace.times.append(t)
        trace.orbital_distances.append(d)
        trace.best_shifts.append(z)
        trace.energies.append(e)
        trace.masses.append(v)

    try:
        evolve(u0, prof.params, dt, horizon, sample_every, record)
    except BlowUpError as exc:
        exc.trace = trace
        raise
    e0, v0 = trace.energies[0], trace.masses[0]
    trace.energy_drift = max(abs(e - e0) for e in trace.energies) / abs(e0)
    trace.mass_drift = max(abs(v - v0) for v in trace.masses) / abs(v0)
    return trace


def default_time_step(profile: SolitonProfile, courant: float = 1.0) -> float:
    """Step from an advective bound ``dt * k_max * max|u|^p <= courant``, capped at 0.01."""
    grid = profile.grid
    kmax = math.pi / grid.spacing
    speed = max(abs(profile.amplitude) ** profile.params.p, profile.params.c, 1e-12)
    dt = min(0.01, courant / (kmax * speed))
    # round down to 1, 2 or 5 times a power of ten so horizons divide evenly
    exp10 = 10.0 ** math.floor(math.log10(dt))
    for m in (5, 2, 1):
        if m * exp10 <= dt:
            return m * exp10
    return exp10


def evolve_backward(u: Field, params: WaveParams, dt: float, duration: float) -> Field:
    """Integrate backward in time using the ``(t, x) -> (-t, -x)`` symmetry of the equation."""
    from .grid import reflect

    return reflect(evolve(reflect(u), params, dt, duration).u)


def time_reversal_error(u0: Field, params: WaveParams, dt: float, duration: float = 1.0) -> float:
    """``H^2`` mismatch after evolving forward and then backward for ``duration``."""
    from .grid import sobolev_norm

    forward = evolve(u0, params, dt, duration).u
    return sobolev_norm(evolve_backward(forward, params, dt, duration) - u0, 2)
