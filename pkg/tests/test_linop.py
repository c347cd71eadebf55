import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kawahara.grid import Field, GridSpec, inner_product_l2, spectral_derivative
from kawahara.linop import (albert_criterion, assemble, bottom_spectrum, log_concavity_bracket,
                            operator_from_potential, sech4_half_transform, sech_power_transform,
                            solve_constrained)
from kawahara.solitons import WaveParams, critical_speed, explicit_gkw_soliton, gkdv_soliton


@pytest.fixture(scope="module")
def op1():
    return assemble(explicit_gkw_soliton(1, mu=critical_speed(1)))


def test_operator_on_constant_without_potential():
    g = GridSpec(10.0, 64)
    op = operator_from_potential(WaveParams(1, 0.7, 0.3), Field.zeros(g))
    assert np.allclose(op.apply(Field(g, np.ones(64))).values, 0.7, atol=1e-14)


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_kernel_and_profile_identities(p):
    prof = explicit_gkw_soliton(p, mu=critical_speed(p))
    op = assemble(prof)
    dphi = spectral_derivative(prof.field, 1)
    lk = op.apply(dphi)
    assert math.sqrt(inner_product_l2(lk, lk)) < 1e-6
    # L phi = -(p/(p+1)) phi^(p+1), from the profile equation
    lphi = op.apply(prof.field).values
    expected = -(p / (p + 1)) * prof.field.values ** (p + 1)
    assert np.max(np.abs(lphi - expected)) < 1e-8


def test_dense_matrix_matches_fft_application(op1, rng):
    g = op1.grid
    v = Field(g, np.exp(-(g.x / 3) ** 2) * (1 + 0.3 * np.sin(g.x)))
    assert np.max(np.abs(op1.matrix @ v.values - op1.apply(v).values)) < 1e-9
    assert np.allclose(op1.matrix, op1.matrix.T)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_self_adjoint_on_smooth_fields(seed):
    g = GridSpec(20.0, 128)
    prof = gkdv_soliton(1.0, 2, g, check_grid=False)
    op = operator_from_potential(prof.params, Field(g, prof.field.values ** 2))
    r = np.random.default_rng(seed)
    u, v = (Field(g, sum(r.normal() * np.exp(-((g.x - r.uniform(-5, 5)) / r.uniform(0.5, 2)) ** 2)
                         for _ in range(3))) for _ in range(2))
    assert inner_product_l2(op.apply(u), v) == pytest.approx(inner_product_l2(u, op.apply(v)),
                                                               rel=1e-9, abs=1e-9)


def test_poschl_teller_spectrum_for_gkdv():
    # -d2 + 1 - 3 sech^2(x/2) has eigenvalues -5/4, 0, 3/4 below the continuum at 1
    prof = gkdv_soliton(1.0, 1)
    rep = bottom_spectrum(assemble(prof), 3)
    assert rep.eigenvalues == pytest.approx([-1.25, 0.0, 0.75], abs=1e-9)
    assert rep.negative_count == 1


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_spectral_properties(p):
    prof = explicit_gkw_soliton(p, mu=critical_speed(p))
    rep = bottom_spectrum(assemble(prof), 6)
    assert rep.negative_count == 1
    assert abs(rep.kernel_eigenvalue) < 1e-6
    assert rep.kernel_alignment > 0.999
    assert rep.essential_floor == pytest.approx(1.0, abs=1e-10)
    others = [ev for i, ev in enumerate(rep.eigenvalues) if i not in (0, rep.kernel_index)]
    assert all(ev > 0 for ev in others)


def test_free_operator_bottom_is_c():
    g = GridSpec(30.0, 256)
    op = operator_from_potential(WaveParams(2, 0.4, 1.0), Field.zeros(g))
    assert bottom_spectrum(op, 3).eigenvalues[0] == pytest.approx(0.4, abs=1e-10)


def test_negative_eigenvalue_converges_under_refinement():
    prof = explicit_gkw_soliton(1, mu=critical_speed(1))
    lam = bottom_spectrum(assemble(prof), 3).eigenvalues[0]
    fine = explicit_gkw_soliton(1, prof.grid.refined(2), mu=critical_speed(1))
    lam_fine = bottom_spectrum(assemble(fine), 3).eigenvalues[0]
    assert lam == pytest.approx(lam_fine, rel=1e-4)


def test_constrained_solve_recovers_even_field(op1):
    g = op1.grid
    v = Field(g, np.exp(-(g.x / 4) ** 2))
    rho = solve_constrained(op1, op1.apply(v))
    assert np.max(np.abs(rho.values - v.values)) < 1e-7
    assert np.max(np.abs(solve_constrained(op1, Field.zeros(g)).values)) == 0.0


def test_phi_squared_identity_for_p1(op1):
    phi = explicit_gkw_soliton(1, mu=critical_speed(1)).field
    rho = solve_constrained(op1, phi)
    norm2 = inner_product_l2(phi, phi)
    a, b = 35 / 12, math.sqrt(13) / 12
    assert norm2 == pytest.approx(a * a * (32 / 35) / b, rel=1e-10)
    phi2 = Field(phi.grid, phi.values ** 2)
    assert inner_product_l2(rho, phi2) == pytest.approx(-2 * norm2, rel=1e-3)


@pytest.mark.parametrize("nu", [0.8, 1.0, 2.0, 4.0, 4.0 / 3.0])
@pytest.mark.parametrize("omega", [0.0, 0.5, 1.0, 3.0])
def test_sech_power_transform_against_quadrature(nu, omega):
    val, _ = quad(lambda x: 2 * np.cosh(x) ** (-nu) * math.cos(omega * x), 0, 200, limit=400)
    assert float(sech_power_transform(nu, omega)) == pytest.approx(val, rel=1e-8)


def test_sech4_half_closed_form():
    assert float(sech4_half_transform(1.0)) == pytest.approx(32 * math.pi / 6 / math.sinh(math.pi), rel=1e-14)
    assert float(sech4_half_transform(1.0)) == pytest.approx(1.450822, abs=1e-6)
    # sech^4(x/2) = rescaled sech^4: F(omega) = 2 F_4(2 omega)
    for w in (0.3, 1.0, 2.0):
        assert float(sech4_half_transform(w)) == pytest.approx(2 * float(sech_power_transform(4, 2 * w)), rel=1e-12)


def test_log_concavity_bracket_values():
    assert float(log_concavity_bracket(1.0)) == pytest.approx(-1 + math.pi ** 2 / math.sinh(math.pi) ** 2, rel=1e-14)
    assert float(log_concavity_bracket(1.0)) == pytest.approx(-0.92600, abs=1e-5)
    # removable singularity: limit 2 - pi^2/3 at omega -> 0
    assert float(log_concavity_bracket(1e-3)) == pytest.approx(2 - math.pi ** 2 / 3, abs=1e-4)


def test_log_concavity_bracket_is_second_log_derivative():
    w, h = 0.8, 1e-3
    f = lambda t: math.log(float(sech4_half_transform(t)))
    fd = (f(w + h) - 2 * f(w) + f(w - h)) / h ** 2
    assert float(log_concavity_bracket(w)) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_albert_criterion(p):
    rep = albert_criterion(p)
    assert rep.positivity_ok and rep.logconcavity_ok
    assert rep.max_bracket < 0
