import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kawahara.grid import Field, GridSpec, default_grid, sobolev_norm
from kawahara.groundstate import (MinimizationError, MinimizationProblem, beta_p,
                                  empirical_uniqueness_probe, functionals, h1_distance, minimize,
                                  scaling_identity_check, subadditivity_gap)
from kawahara.solitons import (WaveParams, asymptotic_decay_roots, fit_decay_rate, gkdv_soliton,
                               profile_from_field, rescale_normalization, residual_l2)

MUS = (1e-1, 1e-2, 1e-3, 1e-4)


@pytest.fixture(scope="module")
def scans():
    return {p: [minimize(MinimizationProblem(p, mu)) for mu in MUS] for p in (1, 2, 3)}


def test_functionals_of_zero_and_gkdv():
    g = default_grid(1.0)
    assert functionals(Field.zeros(g), 0.1, 1) == (0.0, 0.0)
    phi = gkdv_soliton(1.0, 1, g).field
    i0, k1 = functionals(phi, 0.0, 1)
    assert k1 == pytest.approx(9.6, rel=1e-12)
    assert i0 == pytest.approx(14.4, rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_beta_closed_form_matches_quadrature(p):
    phi = gkdv_soliton(1.0, p).field
    assert beta_p(p) == pytest.approx(functionals(phi, 0.0, p)[1], rel=1e-12)


def test_beta_values():
    assert beta_p(1) == pytest.approx(9.6, rel=1e-14)
    assert beta_p(2) == pytest.approx(4.0, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 10.0))
def test_quadratic_form_is_coercive(seed, mu):
    g = GridSpec(20.0, 256)
    r = np.random.default_rng(seed)
    f = Field(g, sum(r.normal() * np.exp(-((g.x - r.uniform(-5, 5)) / r.uniform(0.3, 3)) ** 2)
                     for _ in range(4)))
    i_mu, _ = functionals(f, mu, 1)
    assert i_mu >= 0.5 * min(mu, 1.0) * sobolev_norm(f, 2) ** 2 * (1 - 1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_scan_converges_and_satisfies_constraint(scans, p):
    for res in scans[p]:
        assert abs(res.k_value - beta_p(p)) < 1e-8
        assert res.el_residual < 1e-8
        d = res.to_dict()
        assert d["profile_residual"] < 1e-8
        # Lagrange multiplier identity alpha = 2 I / ((p+2) beta)
        assert res.alpha == pytest.approx(2 * res.i_value / ((p + 2) * beta_p(p)), rel=1e-14)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_multiplier_and_limit_behaviour(scans, p):
    alphas = [r.alpha for r in scans[p]]
    assert all(0 < a <= 1.05 for a in alphas)
    assert all(abs(a2 - 1) < abs(a1 - 1) for a1, a2 in zip(alphas, alphas[1:]))
    assert abs(alphas[-1] - 1) < 1e-3
    dists = [r.to_dict()["h1_distance_to_gkdv"] for r in scans[p]]
    assert all(d2 < d1 for d1, d2 in zip(dists, dists[1:]))


def test_small_mu_is_close_to_gkdv(scans):
    res = scans[1][2]  # mu = 1e-3
    assert h1_distance(res.psi, gkdv_soliton(1.0, 1, res.psi.grid).field) < 0.01


def test_scaling_identity():
    assert scaling_identity_check(1, 0.01, beta_p(1)) == 0.0
    assert scaling_identity_check(1, 0.01, 2 * beta_p(1)) < 1e-6


def test_strict_subadditivity():
    assert subadditivity_gap(1, 0.01, beta_p(1) / 2) > 0
    with pytest.raises(ValueError):
        subadditivity_gap(1, 0.01, 2 * beta_p(1))


@pytest.mark.parametrize("p", [1, 3])
def test_multi_start_uniqueness(p):
    details = {}
    spread = empirical_uniqueness_probe(MinimizationProblem(p, 1e-3), 5, seed=0, details=details)
    assert spread < 1e-8
    assert details["converged"] == 5


def test_single_start_has_zero_spread():
    assert empirical_uniqueness_probe(MinimizationProblem(2, 1e-2), 1) == 0.0


def test_decay_rate_matches_slow_root():
    mu = 1e-2
    res = minimize(MinimizationProblem(1, mu))
    s1, _ = asymptotic_decay_roots(mu)
    assert fit_decay_rate(res.phi) == pytest.approx(s1, rel=0.05)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_rescaled_minimizer_solves_unit_mu_problem(p):
    mu = 1e-2
    prof = minimize(MinimizationProblem(p, mu)).profile()
    moved = rescale_normalization(prof, "to_mu_one")
    assert moved.params == WaveParams(p, mu, 1.0)
    assert residual_l2(moved.field, moved.params) < 1e-8
    assert moved.amplitude == pytest.approx(mu ** (1 / p) * prof.amplitude, rel=1e-14)


def test_problem_validation():
    with pytest.raises(ValueError):
        MinimizationProblem(5, 0.1)
    with pytest.raises(ValueError):
        MinimizationProblem(4, 0.1)
    with pytest.raises(ValueError):
        MinimizationProblem(1, 0.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        MinimizationProblem(4, 0.1, allow_p4=True)
    assert caught


def test_guess_on_wrong_grid_is_rejected():
    prob = MinimizationProblem(1, 0.1)
    with pytest.raises(MinimizationError):
        minimize(prob, gkdv_soliton(1.0, 1, GridSpec(40.0, 512)).field)


def test_result_profile_is_speed_one_wave():
    res = minimize(MinimizationProblem(2, 0.05))
    prof = res.profile()
    assert prof.params == WaveParams(2, 1.0, 0.05)
    assert prof.amplitude == pytest.approx(res.alpha ** 0.5 * res.psi.at_origin())
    assert math.isfinite(profile_from_field(res.phi, prof.params).decay_scale)
