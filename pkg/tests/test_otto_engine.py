import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polariton_engine.dynamics import MeasurementScheme
from polariton_engine.jaynes_cummings import JCParams, two_qubit_dressed
from polariton_engine.otto_engine import (
    EngineConfig, HierarchyWarning, analytic_work_multi, analytic_work_single, analytic_work_two_qubit,
    auto_fock_cutoff, config_errors, flux_for_frequency, hierarchy_warnings, histogram_work,
    prepare_field_state, run_measured_stroke, simulate_cycle, thermal_distribution, thermal_photon_number,
    transmon_frequency, work_distribution,
)

detunings = st.floats(0.05, 0.5)
n_bars = st.floats(0.01, 5.0)


@settings(max_examples=100, deadline=None)
@given(d1=detunings, d2=detunings, g=st.floats(1e-4, 0.02), n_bar=n_bars)
def test_work_sign_and_bound(d1, d2, g, n_bar):
    c = EngineConfig(delta_1=-d1, delta_2=d2, g=g, n_bar=n_bar)
    single = analytic_work_single(c)
    p1 = c.single_photon_weight
    assert single.W_out <= 0
    if d2 <= d1:
        assert abs(single.W_tot) <= p1 * d1 * (1 + 1e-12)
    # otherwise only the dressed shift at omega_1 can exceed the bound
    assert abs(single.W_tot) <= p1 * (d1 + g ** 2 / d1) * (1 + 1e-12)
    multi = analytic_work_multi(c)
    assert multi.W_out <= 0 <= multi.W_in


@settings(max_examples=50, deadline=None)
@given(d=detunings, n_bar=n_bars)
def test_symmetric_cancellation(d, n_bar):
    c = EngineConfig(delta_1=-d, delta_2=d, n_bar=n_bar)
    r = analytic_work_multi(c)
    assert abs(r.W_tot - (c.omega_1 - 1) * r.p_n[1]) < 1e-12


@settings(max_examples=50, deadline=None)
@given(d1=detunings, d2=detunings, n_bar=n_bars)
def test_multi_closed_form(d1, d2, n_bar):
    r = analytic_work_multi(EngineConfig(delta_1=-d1, delta_2=d2, n_bar=n_bar))
    assert r.W_tot == pytest.approx(r.diagnostics["W_tot_closed_form"], abs=1e-7)


def test_asymmetric_shift():
    sym = analytic_work_multi(EngineConfig(delta_1=-0.25, delta_2=0.25, n_bar=1.0))
    asym = analytic_work_multi(EngineConfig(delta_1=-0.25, delta_2=0.15, n_bar=1.0))
    p = asym.p_n
    assert asym.W_tot - sym.W_tot == pytest.approx((-0.25 + 0.15) * (1 - p[0] - p[1]), abs=1e-7)
    assert asym.W_tot < sym.W_tot


def test_work_maximal_at_unit_occupation():
    grid = [0.25, 0.5, 1.0, 2.0, 4.0]
    W = [analytic_work_multi(EngineConfig(n_bar=n)).W_tot for n in grid]
    assert int(np.argmin(W)) == 2
    assert W[2] == pytest.approx(-0.25 * 0.2, abs=1e-12)


def test_hot_limit_of_output_stroke():
    r = analytic_work_multi(EngineConfig(n_bar=1000.0))
    assert abs(r.W_out) == pytest.approx(0.2, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(d=st.floats(0.1, 0.4), g=st.floats(1e-4, 0.01), n_bar=n_bars)
def test_two_qubit_equivalence(d, g, n_bar):
    c = EngineConfig(delta_1=-d, delta_2=d, g=g, n_bar=n_bar)
    w1 = analytic_work_single(c).W_tot
    w2 = analytic_work_two_qubit(c).W_tot
    assert abs(w2 - w1) / abs(w1) < 4 * g ** 2 / d ** 2


def test_small_coupling_limits():
    c = EngineConfig(g=1e-7, n_bar=0.1)
    p1 = c.single_photon_weight
    assert analytic_work_single(c).W_tot == pytest.approx(p1 * c.delta_1, rel=1e-9)
    assert analytic_work_two_qubit(c).W_tot == pytest.approx(analytic_work_single(c).W_tot, rel=1e-9)
    assert analytic_work_single(EngineConfig(p1=0.0)).W_tot == 0.0
    assert analytic_work_two_qubit(EngineConfig(n_bar=0.0)).W_tot == 0.0


def test_symmetric_working_point_saturates_bound():
    r = analytic_work_single(EngineConfig(p1=0.08))
    assert abs(r.W_tot) <= 0.016
    assert r.W_tot == pytest.approx(-0.016, rel=1e-3)


def test_two_qubit_gap_at_resonance():
    plus, minus, ep, em = two_qubit_dressed(JCParams(1.0, 0.013, n_qubits=2))
    assert ep - em == pytest.approx(2 * math.sqrt(2) * 0.013, abs=1e-14)


def test_thermal_occupation():
    n = thermal_photon_number(2 * math.pi * 15e9, 0.3)
    assert n == pytest.approx(0.0998, abs=5e-4)
    assert thermal_photon_number(1e9, 0.0) == 0.0
    with pytest.raises(ValueError):
        thermal_photon_number(1e9, -1.0)


@given(n_bar=st.floats(0, 20))
def test_thermal_distribution_normalized_with_tail(n_bar):
    n_max = auto_fock_cutoff(n_bar)
    p, tail = thermal_distribution(n_bar, n_max)
    assert tail < 1e-8
    assert p.sum() + tail == pytest.approx(1.0, abs=1e-12)
    assert n_max >= 3


def test_field_preparations():
    assert prepare_field_state("thermal", 0.0, 4)[0] == 1.0
    even = prepare_field_state("even_only", 1.0, 60)
    assert even[1] == 0.0
    assert even.sum() == pytest.approx(1.0, abs=1e-12)
    thermal = analytic_work_multi(EngineConfig(n_bar=1.0)).W_tot
    squeezed = analytic_work_multi(EngineConfig(n_bar=1.0, field_prep="even_only")).W_tot
    assert abs(squeezed) < abs(thermal)
    with pytest.raises(ValueError):
        prepare_field_state("coherent", 1.0, 4)


def test_transmon_flux_program():
    assert transmon_frequency(0.0, 1.5) == pytest.approx(1.5)
    assert transmon_frequency(0.5, 1.5) == pytest.approx(0.0, abs=1e-15)
    assert transmon_frequency(1 / 3, 1.5) == pytest.approx(1.5 / math.sqrt(2))
    phi = flux_for_frequency(0.8, 1.5)
    assert transmon_frequency(phi, 1.5) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        flux_for_frequency(2.0, 1.5)


def test_config_errors_aggregate():
    with pytest.raises(ValueError, match="heat-pump"):
        EngineConfig(delta_1=0.2, delta_2=-0.2)
    probe = EngineConfig()
    object.__setattr__(probe, "g", -1.0)
    object.__setattr__(probe, "n_bar", -1.0)
    assert len(config_errors(probe)) == 2
    with pytest.raises(ValueError):
        EngineConfig(n_bar=None)


def test_default_config_warnings():
    msgs = hierarchy_warnings(EngineConfig())
    # |Delta| = 0.2 is not ten times below omega_1 = 0.8; the timescale chain is respected
    assert all("RWA" in m for m in msgs) and len(msgs) == 2
    assert any("tau_3" in m for m in hierarchy_warnings(EngineConfig(tau=(None, 5e7, 1e5, 5e5))))


def test_cold_field_idle_cycle():
    c = EngineConfig(n_bar=0.0, tau=(500.0, 5e7, 500.0, 5e5), n_cycles=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HierarchyWarning)
        r = simulate_cycle(c)
    assert abs(r.W_tot) < 1e-6
    assert r.diagnostics["max_trace_drift"] < 1e-8


def test_numeric_cycle_orders_like_analytics():
    base = dict(n_bar=1.0, fock_cutoff=5, tau=(500.0, 5e7, 2000.0, 5e5), n_cycles=1, g=0.005)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HierarchyWarning)
        sym = simulate_cycle(EngineConfig(delta_1=-0.25, delta_2=0.25, **base)).W_tot
        asym = simulate_cycle(EngineConfig(delta_1=-0.25, delta_2=0.15, **base)).W_tot
    a_sym = analytic_work_multi(EngineConfig(delta_1=-0.25, delta_2=0.25, n_bar=1.0)).W_tot
    a_asym = analytic_work_multi(EngineConfig(delta_1=-0.25, delta_2=0.15, n_bar=1.0)).W_tot
    assert (asym < sym) == (a_asym < a_sym)


def test_histogram_bins_and_normalization():
    works = np.array([0.0, 0.001, -0.2, -0.199, -0.1024])
    d = histogram_work(works, 0.005)
    assert d.probabilities.sum() == pytest.approx(1.0)
    assert d.counts.sum() == 5
    # zero sits in the middle of its bin
    k = np.searchsorted(d.bin_edges, 0.0) - 1
    assert d.centers[k] == pytest.approx(0.0, abs=1e-15)
    assert d.mean == pytest.approx(works.mean())


def test_unmonitored_distribution_fraction():
    c = EngineConfig(p1=0.08, tau=(None, 5e7, 2000.0, 5e5))
    d = work_distribution(c, MeasurementScheme(), 250, master_seed=3)
    frac = d.counts[np.abs(d.centers) < 0.005 / 2].sum() / d.n_trajectories
    sigma = math.sqrt(0.08 * 0.92 / 250)
    assert abs(frac - 0.92) < 3 * sigma


def test_thread_count_does_not_change_results():
    c = EngineConfig(p1=0.3, tau=(None, 5e7, 300.0, 5e5))
    scheme = MeasurementScheme("dispersive", 1e-3)
    a, ea = run_measured_stroke(c, scheme, 600, 21, threads=1)
    b, eb = run_measured_stroke(c, scheme, 600, 21, threads=3)
    np.testing.assert_array_equal(a.works, b.works)
    np.testing.assert_array_equal(ea, eb)
    for k in a.mean_populations:
        np.testing.assert_array_equal(a.mean_populations[k], b.mean_populations[k])
