"""Newton continuation of the even branch in ``c`` and coercivity margins.

The Newton map works on half-grid values of even fields, so the odd kernel
``phi'`` never enters the Jacobian.  The coercivity margin is the smallest
eigenvalue of ``<L v, v> = lambda <v, v>_{H^2}`` on ``{v : <v,phi> = <v,phi'> = 0}``;
since ``phi`` is even and ``phi'`` odd, the problem splits into an even block
constrained by ``phi`` and an odd block constrained by ``phi'``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .grid import Field, GridSpec, even_expansion_matrices, sobolev_weights, spectral_derivative
from .linop import half_grid_indices
from .solitons import SolitonProfile, WaveParams, _power, profile_from_field, residual_l2

__all__ = [
    "BranchPoint",
    "Branch",
    "ContinuationError",
    "newton_solve",
    "newton_continue",
    "coercivity_check",
    "coercivity_details",
    "almost_orthogonality_margin",
    "h4_distance",
    "empirical_window",
]

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-9


class ContinuationError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class BranchPoint:
    params: WaveParams
    profile: SolitonProfile
    newton_residual: float
    coercivity_margin: float
    distance_to_seed: float
    gamma: float
    newton_iterations: int = 0


@dataclass
class Branch:
    """Accepted branch points in continuation order, plus a failure marker."""

    points: list[BranchPoint] = field(default_factory=list)
    failed: bool = False
    message: str = ""

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def _circulant_from_symbol(symbol: np.ndarray) -> np.ndarray:
    return sla.circulant(np.fft.ifft(symbol).real)


class _EvenSystem:
    """Dense pieces of ``mu d^4 - d^2 + c - V`` restricted to even fields."""

    def __init__(self, grid: GridSpec, mu: float):
        self.grid = grid
        k2 = grid.k ** 2
        free = _circulant_from_symbol(mu * k2 * k2 + k2)
        E, _ = even_expansion_matrices(grid)
        self.H = half_grid_indices(grid)
        self.free_even = free[self.H] @ E
        self.unfold = np.abs(np.arange(grid.num_points) - grid.num_points // 2)

    def jacobian(self, c: float, potential_half: np.ndarray) -> np.ndarray:
        J = self.free_even.copy()
        J[np.diag_indices_from(J)] += c - potential_half
        return J


def newton_solve(guess: Field, params: WaveParams, tol: float = NEWTON_TOL,
                 max_iter: int = 25, system: _EvenSystem | None = None
                 ) -> tuple[Field, float, int]:
    """Newton iteration for the even profile equation; returns (field, residual, iterations).

    Raises :class:`ContinuationError` on divergence (three successive residual
    increases) or a singular Jacobian.
    """
    grid = guess.grid
    system = system or _EvenSystem(grid, params.mu)
    H = system.H
    p = params.p
    half = 0.5 * (guess.values[H] + guess.values[grid.reflection_index][H])
    u = Field(grid, half[system.unfold])
    res = residual_l2(u, params)
    history = [res]
    growth = 0
    it = 0
    while res >= tol:
        if it >= max_iter:
            raise ContinuationError("Newton did not converge", {"residual_history": history})
        T = _residual_values(u, params)[H]
        J = system.jacobian(params.c, _power(half, p))
        try:
            step = sla.solve(J, T, check_finite=False)
        except sla.LinAlgError as exc:
            raise ContinuationError(f"singular Jacobian (fold?): {exc}",
                                    {"residual_history": history}) from exc
        half = half - step
        u = Field(grid, half[system.unfold])
        new_res = residual_l2(u, params)
        it += 1
        growth = growth + 1 if new_res > res else 0
        res = new_res
        history.append(res)
        if growth >= 3 or not math.isfinite(res):
            raise ContinuationError("Newton diverged", {"residual_history": history})
    if it:
        # one polishing step, kept only if it lowers the residual further
        T = _residual_values(u, params)[H]
        J = system.jacobian(params.c, _power(half, p))
        polished = Field(grid, (half - sla.solve(J, T, check_finite=False))[system.unfold])
        pres = residual_l2(polished, params)
        if pres < res:
            u, res = polished, pres
    return u, res, it


def _residual_values(u: Field, params: WaveParams) -> np.ndarray:
    k2 = u.grid.k ** 2
    lin = np.fft.ifft((params.mu * k2 * k2 + k2 + params.c) * np.fft.fft(u.values)).real
    return lin - _power(u.values, params.p + 1) / (params.p + 1)


def _weighted_sq_norm(f: Field, weights: np.ndarray) -> float:
    fh = np.fft.fft(f.values)
    return float(np.sum(weights * np.abs(fh) ** 2) * f.grid.spacing / f.grid.num_points)


def h4_distance(a: Field, b: Field) -> float:
    k2 = a.grid.k ** 2
    w = sum(k2 ** j for j in range(5))
    return math.sqrt(_weighted_sq_norm(a - b, w))


def almost_orthogonality_margin(profile_c: SolitonProfile, profile_seed: SolitonProfile) -> float:
    """``gamma = ||phi_c - phi_seed||_{H^1}``."""
    diff = profile_c.field - profile_seed.field
    return math.sqrt(_weighted_sq_norm(diff, sobolev_weights(diff.grid, 1)))


def _constrained_min(M: np.ndarray, G: np.ndarray, constraint: np.ndarray) -> float:
    Z = sla.null_space(constraint[None, :])
    Mz = Z.T @ M @ Z
    Gz = Z.T @ G @ Z
    vals = sla.eigh(0.5 * (Mz + Mz.T), 0.5 * (Gz + Gz.T), subset_by_index=[0, 0],
                    eigvals_only=True)
    return float(vals[0])


def coercivity_details(profile: SolitonProfile) -> dict:
    """Even/odd constrained margins and the unconstrained bottom of ``L`` (H^2-relative)."""
    grid = profile.grid
    par = profile.params
    k2 = grid.k ** 2
    A = _circulant_from_symbol(par.mu * k2 * k2 + k2 + par.c)
    A[np.diag_indices_from(A)] -= _power(profile.field.values, par.p)
    G = _circulant_from_symbol(sobolev_weights(grid, 2))
    E, O = even_expansion_matrices(grid)
    phi = profile.field.values
    dphi = spectral_derivative(profile.field, 1).values
    Me, Ge = E.T @ A @ E, E.T @ G @ E
    Mo, Go = O.T @ A @ O, O.T @ G @ O
    even = _constrained_min(Me, Ge, E.T @ phi)
    odd = _constrained_min(Mo, Go, O.T @ dphi)
    free_even = sla.eigh(0.5 * (Me + Me.T), 0.5 * (Ge + Ge.T), subset_by_index=[0, 0],
                         eigvals_only=True)[0]
    return {"margin": min(even, odd), "even": even, "odd": odd,
            "unconstrained": float(free_even)}


def coercivity_check(profile: SolitonProfile) -> float:
    """Smallest ``<Lv,v>/||v||_{H^2}^2`` over ``v`` orthogonal to ``phi`` and ``phi'``."""
    return coercivity_details(profile)["margin"]


def _make_point(u: Field, params: WaveParams, res: float, iters: int,
                seed: SolitonProfile, with_margin: bool) -> BranchPoint:
    prof = profile_from_field(u, params)
    margin = coercivity_check(prof) if with_margin else float("nan")
    return BranchPoint(params, prof, res, margin, h4_distance(u, seed.field),
                       almost_orthogonality_margin(prof, seed), iters)


def newton_continue(seed: SolitonProfile, c_target: float, num_steps: int,
                    tol: float = NEWTON_TOL, with_margin: bool = True,
                    max_halvings: int = 6) -> Branch:
    """Natural-parameter continuation in ``c`` from the seed speed to ``c_target``.

    Each accepted point is Newton-converged to ``tol``; a failed step is halved
    up to ``max_halvings`` times before the partial branch is returned with
    ``failed`` set.
    """
    if not c_target > 0:
        raise ValueError("c_target must be positive")
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    par0 = seed.params
    system = _EvenSystem(seed.grid, par0.mu)
    branch = Branch()
    try:
        u, res, it = newton_solve(seed.field, par0, tol, system=system)
    except ContinuationError as exc:
        branch.failed, branch.message = True, f"seed rejected: {exc}"
        return branch
    branch.points.append(_make_point(u, par0, res, it, seed, with_margin))
    c0 = par0.c
    if c_target == c0:
        return branch
    dc = (c_target - c0) / num_steps
    c = c0
    halvings = 0
    while abs(c_target - c) > 1e-14 * max(1.0, abs(c_target)):
        step = dc if abs(dc) < abs(c_target - c) else c_target - c
        params = WaveParams(par0.p, c + step, par0.mu)
        try:
            u_new, res, it = newton_solve(u, params, tol, system=system)
        except ContinuationError as exc:
            halvings += 1
            if halvings > max_halvings:
                branch.failed = True
                branch.message = f"stopped at c={c:.6g}: {exc}"
                log.warning(branch.message)
                return branch
            dc *= 0.5
            continue
        c += step
        u = u_new
        branch.points.append(_make_point(u, params, res, it, seed, with_margin))
    return branch


def empirical_window(points: list[BranchPoint], c_seed: float) -> tuple[float, float]:
    """Largest contiguous ``[c_lo, c_hi]`` around the seed with margin >= half the seed margin."""
    pts = sorted(points, key=lambda bp: bp.params.c)
    cs = [bp.params.c for bp in pts]
    i0 = int(np.argmin(np.abs(np.array(cs) - c_seed)))
    half = 0.5 * pts[i0].coercivity_margin
    lo = hi = i0
    while lo > 0 and pts[lo - 1].coercivity_margin >= half:
        lo -= 1
    while hi < len(pts) - 1 and pts[hi + 1].coercivity_margin >= half:
        hi += 1
    return cs[lo], cs[hi]
