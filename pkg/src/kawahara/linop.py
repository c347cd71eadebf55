"""Linearized operator ``L v = mu v'''' - v'' + c v - phi^p v`` around a profile.

The operator is diagonal in Fourier space apart from the potential, so the
dense real-space matrix is a symmetric circulant plus a diagonal.  Solves on
the even subspace use the half grid ``x = 0, h, ..., L`` (the values there
determine an even periodic field), which removes the odd kernel ``phi'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.special import gammaln, loggamma

from .grid import Field, GridSpec, even_expansion_matrices, inner_product_l2, spectral_derivative
from .solitons import SolitonProfile, WaveParams, _power, residual_l2

__all__ = [
    "LinearizedOperator",
    "SpectrumReport",
    "AlbertReport",
    "LinopError",
    "assemble",
    "operator_from_potential",
    "bottom_spectrum",
    "albert_criterion",
    "sech_power_transform",
    "log_concavity_bracket",
    "solve_constrained",
    "half_grid_indices",
    "even_expansion",
]

ASSEMBLY_RESIDUAL_TOL = 1e-6
POTENTIAL_EDGE_TOL = 1e-10
KERNEL_REL_TOL = 1e-5


class LinopError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def half_grid_indices(grid: GridSpec) -> np.ndarray:
    """Indices of ``x = m*h`` for ``m = 0..N/2`` (the last one is ``x = -L = L``)."""
    n = grid.num_points
    return (n // 2 + np.arange(n // 2 + 1)) % n


def even_expansion(grid: GridSpec) -> np.ndarray:
    """0/1 matrix mapping half-grid values to the full even field."""
    return even_expansion_matrices(grid)[0]


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    params: WaveParams
    potential: Field
    profile: Field | None = field(default=None, repr=False)

    @property
    def grid(self) -> GridSpec:
        return self.potential.grid

    @cached_property
    def symbol(self) -> np.ndarray:
        k2 = self.grid.k ** 2
        return self.params.mu * k2 * k2 + k2 + self.params.c

    def apply(self, v: Field) -> Field:
        vals = np.fft.ifft(self.symbol * np.fft.fft(v.values)).real
        return v.with_values(vals - self.potential.values * v.values)

    @cached_property
    def free_matrix(self) -> np.ndarray:
        col = np.fft.ifft(self.symbol).real
        return sla.circulant(col)

    @cached_property
    def matrix(self) -> np.ndarray:
        A = self.free_matrix.copy()
        A[np.diag_indices_from(A)] -= self.potential.values
        return 0.5 * (A + A.T)

    @cached_property
    def even_matrix(self) -> np.ndarray:
        """Restriction to even fields, acting on half-grid values."""
        H = half_grid_indices(self.grid)
        return self.matrix[H] @ even_expansion(self.grid)

    @property
    def essential_floor(self) -> float:
        # eigenvalues of the circulant part are exactly the symbol samples
        return float(np.min(self.symbol))


def operator_from_potential(params: WaveParams, potential: Field) -> LinearizedOperator:
    return LinearizedOperator(params, potential)


def assemble(profile: SolitonProfile, residual_tol: float = ASSEMBLY_RESIDUAL_TOL
             ) -> LinearizedOperator:
    res = residual_l2(profile.field, profile.params)
    if res > residual_tol:
        raise LinopError(f"profile residual {res:.3e} exceeds {residual_tol:g}",
                         {"residual_l2": res})
    pot = profile.field.with_values(_power(profile.field.values, profile.params.p))
    edge = abs(pot.values[0])
    if edge > POTENTIAL_EDGE_TOL:
        raise LinopError(f"potential {edge:.3e} at the boundary; grid too small",
                         {"potential_edge": edge})
    return LinearizedOperator(profile.params, pot, profile.field)


@dataclass
class SpectrumReport:
    eigenvalues: list[float]
    eigenfunctions: list[Field]
    negative_count: int
    kernel_alignment: float
    essential_floor: float
    kernel_index: int
    residual_norms: list[float]

    @property
    def kernel_eigenvalue(self) -> float:
        return self.eigenvalues[self.kernel_index]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": list(self.eigenvalues),
            "negative_count": self.negative_count,
            "kernel_alignment": self.kernel_alignment,
            "essential_floor": self.essential_floor,
        }


def bottom_spectrum(op: LinearizedOperator, k: int = 6, residual_tol: float = 1e-7
                    ) -> SpectrumReport:
    """The ``k`` smallest eigenpairs of the discretized operator."""
    if k < 3:
        raise ValueError("need at least 3 eigenpairs")
    grid = op.grid
    h = grid.spacing
    try:
        vals, vecs = sla.eigh(op.matrix, subset_by_index=[0, k - 1])
    except sla.LinAlgError as exc:
        raise LinopError(f"eigensolver failed: {exc}") from exc
    funcs = [Field(grid, vecs[:, i] / math.sqrt(h)) for i in range(k)]
    resid = []
    for lam, f in zip(vals, funcs):
        r = op.apply(f) - lam * f
        resid.append(math.sqrt(inner_product_l2(r, r)))
    if max(resid) > residual_tol:
        raise LinopError("eigenpairs not converged", {"residual_norms": resid})
    floor = op.essential_floor
    thresh = KERNEL_REL_TOL * floor
    kernel_index = int(np.argmin(np.abs(vals)))
    negative = int(np.sum(vals < -thresh))
    alignment = float("nan")
    if op.profile is not None:
        dphi = spectral_derivative(op.profile, 1)
        chi = funcs[kernel_index]
        alignment = abs(inner_product_l2(chi, dphi)) / math.sqrt(inner_product_l2(dphi, dphi))
    return SpectrumReport([float(v) for v in vals], funcs, negative, alignment, floor,
                          kernel_index, resid)


def solve_constrained(op: LinearizedOperator, rhs: Field, tol: float = 1e-8,
                      even_tol: float = 1e-10) -> Field:
    """Even solution ``w`` of ``L w = rhs`` for an even right-hand side."""
    grid = op.grid
    refl = rhs.values[grid.reflection_index]
    scale = max(1.0, float(np.max(np.abs(rhs.values))))
    if np.max(np.abs(rhs.values - refl)) > even_tol * scale:
        raise LinopError("right-hand side is not even")
    if not np.any(rhs.values):
        return Field.zeros(grid)
    H = half_grid_indices(grid)
    A = op.even_matrix
    try:
        lu = sla.lu_factor(A, check_finite=False)
        half = sla.lu_solve(lu, rhs.values[H], check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:
        raise LinopError(f"even-subspace solve failed: {exc}",
                         {"condition": float(np.linalg.cond(A))}) from exc
    n = grid.num_points
    w = Field(grid, half[np.abs(np.arange(n) - n // 2)])
    r = op.apply(w) - rhs
    res = math.sqrt(inner_product_l2(r, r))
    if res > tol:
        raise LinopError(f"constrained solve residual {res:.3e} exceeds {tol:g}",
                         {"residual_l2": res, "condition": float(np.linalg.cond(A))})
    return w


# ---------------------------------------------------------------- Albert test

def sech_power_transform(nu: float, omega) -> np.ndarray:
    """``int sech(x)^nu exp(-i omega x) dx = 2^(nu-1)/Gamma(nu) |Gamma(nu/2 + i omega/2)|^2``."""
    omega = np.asarray(omega, dtype=float)
    logval = ((nu - 1) * math.log(2.0) - gammaln(nu)
              + 2.0 * loggamma(0.5 * nu + 0.5j * omega).real)
    return np.exp(logval)


def sech4_half_transform(omega) -> np.ndarray:
    """Closed form ``(16 pi / 6) omega (omega^2 + 1) / sinh(pi omega)`` for sech^4(x/2)."""
    omega = np.asarray(omega, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (16.0 * math.pi / 6.0) * omega * (omega ** 2 + 1) / np.sinh(math.pi * omega)
    return np.where(omega == 0, 16.0 / 3.0, out)


def log_concavity_bracket(omega) -> np.ndarray:
    """Second derivative of ``log F(sech^4(./2))(omega)`` for ``omega != 0``.

    Equals ``-1/w^2 + 2(1-w^2)/(1+w^2)^2 + pi^2/sinh^2(pi w)``.
    """
    w = np.asarray(omega, dtype=float)
    return -1.0 / w ** 2 + 2.0 * (1 - w ** 2) / (1 + w ** 2) ** 2 + (math.pi / np.sinh(math.pi * w)) ** 2


@dataclass
class AlbertReport:
    p: float
    positivity_ok: bool
    logconcavity_ok: bool
    worst_margin: float
    min_transform: float
    max_bracket: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def albert_criterion(p: float, omega_max: float = 50.0, samples: int = 2000,
                     omega_min: float = 1e-3) -> AlbertReport:
    """Sampled check of transform positivity and log-concavity.

    For the explicit profile ``phi = a sech^(4/p)(b x)`` the transform is a
    positive multiple of ``F(sech^(4/p))(omega/b)``, and ``phi^p`` is always a
    rescaled ``sech^4(./2)``, so both conditions reduce to scale-free checks.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    if not omega_max > omega_min > 0:
        raise ValueError("need 0 < omega_min < omega_max")
    omega = np.geomspace(omega_min, omega_max, samples)
    ft = sech_power_transform(4.0 / p, omega)
    bracket = log_concavity_bracket(omega)
    min_ft = float(np.min(ft))
    max_br = float(np.max(bracket))
    positivity = bool(np.all(ft > 0))
    concave = bool(np.all(bracket < 0))
    # transform values span many decades, so the margin is read off the bracket
    return AlbertReport(p, positivity, concave, -max_br, min_ft, max_br)
