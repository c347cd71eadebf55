"""Solitary waves of the generalized Kawahara equation ``u_t + u^p u_x + u_xxx - mu u_xxxxx = 0``.

Submodules: :mod:`grid` (periodic Fourier grids and fields), :mod:`solitons`
(closed-form profiles), :mod:`linop` (linearized operator, spectrum, Fourier
positivity), :mod:`index` (stability index ``J_p``), :mod:`continuation`
(Newton branches and coercivity margins), :mod:`groundstate` (constrained
minimizers), :mod:`evolution` (ETDRK4 time stepping and orbital distance) and
:mod:`cli`.
"""

from .grid import Field, GridError, GridSpec, default_grid
from .solitons import (SolitonProfile, WaveParams, critical_speed, explicit_gkw_soliton,
                       gkdv_soliton)

__version__ = "0.1.0"

__all__ = [
    "Field",
    "GridError",
    "GridSpec",
    "default_grid",
    "SolitonProfile",
    "WaveParams",
    "critical_speed",
    "explicit_gkw_soliton",
    "gkdv_soliton",
]
