"""Closed-form solitary waves, normalization maps and profile residuals.

Profiles solve ``mu*phi'''' - phi'' + c*phi = phi^(p+1)/(p+1)``.  The
explicit sech-power solutions exist only on the curve
``c*mu = 4(p+2)^2/(p^2+4p+8)^2``; the two normalizations used throughout
are ``mu = 1, c = c_p`` and ``c = 1, mu = mu_p`` (numerically ``c_p == mu_p``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import Field, GridError, GridSpec, default_grid, even_projection, inner_product_l2

__all__ = [
    "WaveParams",
    "SolitonProfile",
    "critical_speed",
    "explicit_amplitude",
    "explicit_sech_coefficient",
    "explicit_gkw_soliton",
    "gkdv_soliton",
    "profile_residual",
    "residual_l2",
    "rescale_normalization",
    "fit_decay_rate",
    "asymptotic_decay_roots",
    "BOUNDARY_TOL",
]

BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class WaveParams:
    p: float
    c: float
    mu: float

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")

    def to_dict(self) -> dict:
        return {"p": self.p, "c": self.c, "mu": self.mu}


@dataclass(frozen=True)
class SolitonProfile:
    """A sampled profile with its parameters.

    ``decay_scale`` is the exponential tail rate of the profile: ``4b/p`` for
    the explicit gKW solitons, ``sqrt(c)`` for gKdV solitons, and a fitted
    value for numerically computed profiles.
    """

    params: WaveParams
    amplitude: float
    decay_scale: float
    field: Field

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    def residual(self) -> Field:
        return profile_residual(self.field, self.params)

    def to_report(self) -> dict:
        return {
            **self.params.to_dict(),
            "amplitude": self.amplitude,
            "decay_scale": self.decay_scale,
            "residual_l2": residual_l2(self.field, self.params),
        }


def critical_speed(p: float) -> float:
    """``c_p = mu_p = 4(p+2)^2 / (p^2+4p+8)^2``."""
    return 4.0 * (p + 2) ** 2 / (p * p + 4 * p + 8) ** 2


def explicit_amplitude(p: float, c: float) -> float:
    return ((p + 1) * (p + 4) * (3 * p + 4) * c / (8.0 * (p + 2))) ** (1.0 / p)


def explicit_sech_coefficient(p: float, c: float) -> float:
    return p * math.sqrt((p * p + 4 * p + 8) * c) / (4.0 * (p + 2))


def _check_boundary(field: Field, amplitude: float):
    edge = abs(field.values[0])
    if edge > BOUNDARY_TOL * amplitude:
        raise GridError(
            f"grid too small: boundary value {edge:.3e} exceeds "
            f"{BOUNDARY_TOL:g} x amplitude {amplitude:.6g}; enlarge half_length")


def _sech_power(x: np.ndarray, power: float) -> np.ndarray:
    # sech(y)^power = (2 e^{-|y|} / (1 + e^{-2|y|}))^power, stable for large |y|
    ay = np.abs(x)
    return np.exp(power * (math.log(2.0) - ay - np.log1p(np.exp(-2.0 * ay))))


def explicit_gkw_soliton(p: float, grid: GridSpec | None = None, *, mu: float = 1.0,
                         check_grid: bool = True) -> SolitonProfile:
    """Explicit sech^(4/p) solitary wave on the curve ``c = c_p / mu``.

    With the default ``mu = 1`` the speed is ``c_p``; ``mu = critical_speed(p)``
    gives the ``c = 1`` normalization.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not mu > 0:
        raise ValueError("explicit gKW solitons need mu > 0")
    c = critical_speed(p) / mu
    amp = explicit_amplitude(p, c)
    b = explicit_sech_coefficient(p, c)
    rate = 4.0 * b / p
    if grid is None:
        grid = default_grid(min(rate, math.sqrt(c)))
    field = Field(grid, amp * _sech_power(b * grid.x, 4.0 / p))
    if check_grid:
        _check_boundary(field, amp)
    return SolitonProfile(WaveParams(p, c, mu), amp, rate, field)


def gkdv_soliton(c: float, p: float, grid: GridSpec | None = None, *,
                 check_grid: bool = True) -> SolitonProfile:
    """gKdV soliton ``[(p+1)(p+2)c/2]^(1/p) sech^(2/p)(p sqrt(c) x / 2)``."""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    amp = ((p + 1) * (p + 2) * c / 2.0) ** (1.0 / p)
    b = p * math.sqrt(c) / 2.0
    if grid is None:
        grid = default_grid(math.sqrt(c))
    field = Field(grid, amp * _sech_power(b * grid.x, 2.0 / p))
    if check_grid:
        _check_boundary(field, amp)
    return SolitonProfile(WaveParams(p, c, 0.0), amp, math.sqrt(c), field)


def profile_residual(field: Field, params: WaveParams) -> Field:
    """Pointwise ``mu u'''' - u'' + c u - u^(p+1)/(p+1)``."""
    u = field.values
    k2 = field.grid.k ** 2
    lin = np.fft.ifft((params.mu * k2 * k2 + k2 + params.c) * np.fft.fft(u)).real
    return field.with_values(lin - _power(u, params.p + 1) / (params.p + 1))


def residual_l2(field: Field, params: WaveParams) -> float:
    r = profile_residual(field, params)
    return math.sqrt(inner_product_l2(r, r))


def _power(u: np.ndarray, q: float) -> np.ndarray:
    if float(q).is_integer():
        return u ** int(q)
    # real exponents only make sense on the positive branch
    return np.sign(u) * np.abs(u) ** q


def rescale_normalization(profile: SolitonProfile, direction: str,
                          grid: GridSpec | None = None) -> SolitonProfile:
    """Map between the ``(c=1, mu=m)`` and ``(c=m, mu=1)`` normalizations.

    ``to_mu_one``: ``v(x) = m^(1/p) u(sqrt(m) x)``; ``to_c_one`` is the inverse.
    The samples are carried over exactly onto a grid whose half-length is
    rescaled by the same factor; pass ``grid`` to resample onto another grid.
    """
    par = profile.params
    p = par.p
    if direction == "to_mu_one":
        if par.mu == 1.0 or par.c != 1.0:
            raise ValueError("to_mu_one expects a profile with c == 1 and mu != 1")
        if par.mu <= 0:
            raise ValueError("rescaling needs mu > 0")
        m = par.mu
        amp_factor, x_factor = m ** (1.0 / p), math.sqrt(m)
        new_params = WaveParams(p, m, 1.0)
    elif direction == "to_c_one":
        if par.c == 1.0 or par.mu != 1.0:
            raise ValueError("to_c_one expects a profile with mu == 1 and c != 1")
        m = par.c
        amp_factor, x_factor = m ** (-1.0 / p), 1.0 / math.sqrt(m)
        new_params = WaveParams(p, 1.0, m)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    # v(x) = A u(s x): sample v at x_j / s to reuse u(x_j)
    old = profile.grid
    scaled = GridSpec(old.half_length / x_factor, old.num_points)
    field = Field(scaled, amp_factor * profile.field.values)
    if grid is not None:
        from .grid import resample
        field = resample(field, grid)
    return SolitonProfile(new_params, amp_factor * profile.amplitude,
                          profile.decay_scale * x_factor, field)


def asymptotic_decay_roots(mu: float, c: float = 1.0) -> tuple[float, float]:
    """Positive decay rates ``s1 <= s2`` of ``mu s^4 - s^2 + c = 0`` (real case)."""
    disc = 1.0 - 4.0 * mu * c
    if mu <= 0:
        return math.sqrt(c), math.inf
    if disc < 0:
        raise ValueError("complex decay roots (4*mu*c > 1): oscillatory tails")
    s1 = math.sqrt((1.0 - math.sqrt(disc)) / (2.0 * mu))
    s2 = math.sqrt((1.0 + math.sqrt(disc)) / (2.0 * mu))
    return s1, s2


def fit_decay_rate(field: Field, floor: float = 1e-13) -> float:
    """Least-squares exponential rate of ``|f|`` on the tails ``|x| >= L/2``."""
    x = field.grid.x
    v = np.abs(field.values)
    scale = float(np.max(v))
    half = field.grid.half_length
    mask = (np.abs(x) >= 0.5 * half) & (v > floor * scale)
    if mask.sum() < 4:
        # tails already at round-off: fall back to the last quarter above the floor
        mask = (np.abs(x) >= 0.25 * half) & (v > floor * scale)
    if mask.sum() < 4:
        raise ValueError("not enough tail samples above the noise floor to fit a rate")
    slope = np.polyfit(np.abs(x[mask]), np.log(v[mask]), 1)[0]
    return float(-slope)


def profile_from_field(field: Field, params: WaveParams) -> SolitonProfile:
    """Wrap a numerically computed even profile."""
    field = even_projection(field)
    try:
        rate = fit_decay_rate(field)
    except ValueError:
        rate = float("nan")
    return SolitonProfile(params, field.at_origin(), rate, field)


def with_params(profile: SolitonProfile, **changes) -> SolitonProfile:
    return replace(profile, params=replace(profile.params, **changes))
