import math

import numpy as np
import pytest

from kawahara.evolution import (ETDRK4, BlowUpError, conserved, evolve, gaussian_perturbation,
                                make_state, orbital_distance, stability_experiment, step,
                                time_reversal_error)
from kawahara.grid import Field, GridSpec, inner_product_l2, sobolev_norm, translate
from kawahara.solitons import WaveParams, critical_speed, explicit_gkw_soliton, gkdv_soliton


@pytest.fixture(scope="module")
def sol1():
    return explicit_gkw_soliton(1)


def test_zero_data_stays_zero():
    g = GridSpec(20.0, 128)
    out = evolve(Field.zeros(g), WaveParams(2, 1.0, 1.0), 0.01, 1.0)
    assert np.max(np.abs(out.u.values)) == 0.0


def test_linear_flow_is_unitary():
    g = GridSpec(30.0, 256)
    u0 = Field(g, np.exp(-g.x ** 2) * (1 + np.sin(3 * g.x)))
    out = evolve(u0, WaveParams(1, 1.0, 0.5), 0.05, 10.0, nonlinear=False)
    assert inner_product_l2(out.u, out.u) == pytest.approx(inner_product_l2(u0, u0), rel=1e-13)


def test_linear_flow_matches_exact_propagator():
    g = GridSpec(30.0, 256)
    u0 = Field(g, np.exp(-g.x ** 2))
    mu, t = 0.5, 3.0
    k = g.k
    exact = np.fft.ifft(np.exp(1j * (k ** 3 + mu * k ** 5) * t) * np.fft.fft(u0.values)).real
    out = evolve(u0, WaveParams(1, 1.0, mu), 0.1, t, nonlinear=False)
    assert np.max(np.abs(out.u.values - exact)) < 1e-12


def test_conserved_quantities_closed_forms():
    g = GridSpec(60.0, 1024)
    assert conserved(Field.zeros(g), WaveParams(1, 1.0, 1.0)) == (0.0, 0.0)
    phi = gkdv_soliton(1.0, 1, g).field
    e, v = conserved(phi, WaveParams(1, 1.0, 0.0))
    assert v == pytest.approx(12.0, rel=1e-12)
    # int phi'^2/2 = 2.4 and int phi^3/6 = 9.6
    assert e == pytest.approx(-7.2, rel=1e-12)


def test_state_caches_match(sol1):
    st = make_state(sol1.field, sol1.params)
    nxt = step(st, 0.01)
    e, v = conserved(nxt.u, nxt.params)
    assert nxt.energy == pytest.approx(e, abs=1e-12) and nxt.mass == pytest.approx(v, abs=1e-12)
    assert nxt.time == pytest.approx(0.01)


def test_step_matches_evolve(sol1):
    a = step(step(make_state(sol1.field, sol1.params), 0.02), 0.02).u
    b = evolve(sol1.field, sol1.params, 0.02, 0.04).u
    assert np.max(np.abs(a.values - b.values)) < 1e-15


def test_dealiasing_pad_size(sol1):
    for p in (1, 2, 5):
        integ = ETDRK4(sol1.grid, WaveParams(p, 1.0, 1.0), 0.01)
        assert integ.pad >= (p + 2) * sol1.grid.num_points / 2


def test_exact_soliton_propagation(sol1):
    c, T = sol1.params.c, 50.0
    out = evolve(sol1.field, sol1.params, 0.01, T)
    assert sobolev_norm(out.u - translate(sol1.field, c * T), 2) < 1e-5
    d, z = orbital_distance(out.u, sol1)
    assert d < 1e-5
    assert -z == pytest.approx(c * T, rel=1e-9)


def test_conservation_drift_and_fourth_order(sol1):
    e0, v0 = conserved(sol1.field, sol1.params)

    def drift(dt):
        st = evolve(sol1.field, sol1.params, dt, 50.0)
        return max(abs(st.energy / e0 - 1), abs(st.mass / v0 - 1))

    coarse, fine = drift(0.1), drift(0.05)
    assert coarse / fine >= 8.0
    assert drift(0.01) < 1e-8


def test_time_reversal(sol1):
    u0 = sol1.field + gaussian_perturbation(sol1.grid, 3.0) * 1e-3
    assert time_reversal_error(u0, sol1.params, 0.01, 1.0) < 1e-6


def test_orbital_distance_trivial_cases(sol1):
    d, z = orbital_distance(sol1.field, sol1)
    assert d < 1e-10 and abs(z) < 1e-10
    d, z = orbital_distance(translate(sol1.field, 2.5), sol1)
    assert d < 1e-9
    assert z == pytest.approx(-2.5, abs=1e-10)


def test_orbital_distance_of_small_even_bump(sol1):
    bump = gaussian_perturbation(sol1.grid, 2.0)
    d, z = orbital_distance(sol1.field + bump * 0.01, sol1)
    assert 0 < d <= 0.01 * sobolev_norm(bump, 2) * (1 + 1e-12)
    assert abs(z) < 1e-8


def test_gaussian_perturbation_is_unit_h2(sol1):
    assert sobolev_norm(gaussian_perturbation(sol1.grid, 1.3), 2) == pytest.approx(1.0, rel=1e-13)


def test_unperturbed_experiment_and_speed(sol1):
    tr = stability_experiment(1, "explicit", critical_speed(1), 0.0, 20.0, profile=sol1)
    assert max(tr.orbital_distances) < 1e-6
    assert tr.measured_speed(sol1.grid.half_length) == pytest.approx(sol1.params.c, rel=1e-3)


def test_perturbed_experiment_records_trace(sol1):
    tr = stability_experiment(1, "explicit", critical_speed(1), 1e-3, 10.0, profile=sol1)
    assert tr.orbital_distances[0] == pytest.approx(1e-3, abs=1e-10)
    assert len(tr.times) == 11
    assert tr.energy_drift < 1e-8 and tr.mass_drift < 1e-8
    assert tr.label.startswith("stable up to T=")


def test_sup_distance_monotone_in_delta(sol1):
    sups = [stability_experiment(1, "explicit", critical_speed(1), d, 10.0, profile=sol1).sup_distance
            for d in (1e-4, 1e-3, 1e-2)]
    assert sups[0] <= sups[1] <= sups[2]


def test_eigenfunction_perturbation_runs():
    prof = explicit_gkw_soliton(2)
    tr = stability_experiment(2, "explicit", critical_speed(2), 1e-3, 2.0,
                              perturbation="eigenfunction", profile=prof)
    assert tr.orbital_distances[0] == pytest.approx(1e-3, abs=1e-10)


def test_p5_is_labelled_outside_proven_regime():
    prof = explicit_gkw_soliton(5)
    tr = stability_experiment(5, "explicit", critical_speed(5), 1e-3, 1.0, profile=prof)
    assert "outside proven regime" in tr.label


def test_large_delta_rejected(sol1):
    with pytest.raises(ValueError):
        stability_experiment(1, "explicit", critical_speed(1), 0.2 * sol1.amplitude, 1.0, profile=sol1)


def test_blow_up_detection():
    g = GridSpec(40.0, 512)
    u0 = Field(g, 20 * np.exp(-g.x ** 2))
    with pytest.raises(BlowUpError):
        evolve(u0, WaveParams(2, 1.0, 1.0), 0.5, 50.0)


def test_evolve_rejects_misaligned_horizon(sol1):
    with pytest.raises(ValueError):
        evolve(sol1.field, sol1.params, 0.3, 1.0)


def test_non_integer_power_rejected(sol1):
    with pytest.raises(ValueError):
        ETDRK4(sol1.grid, WaveParams(1.5, 1.0, 1.0), 0.01)
    assert math.isfinite(conserved(sol1.field, sol1.params)[0])
