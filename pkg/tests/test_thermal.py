import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from thermopix.calibration import fit_tau, linear_fit
from thermopix.envelope import EnvelopeFit
from thermopix.physics import ActuatorGeometry, ChainGains
from thermopix.thermal import (
    PulseSchedule,
    ThermalModel,
    peak_force,
    periodic_initial_rise,
    power_to_reach,
    simulate,
    step_response,
)
from thermopix.traces import decompose_cyclic, sim_channel
from thermopix.units import mm


def ode_oracle(model, schedule, t_eval, T_initial=0.0):
    """Integrate C dT/dt = P - T/R piecewise with a generic ODE solver."""
    edges = sorted({0.0, *schedule.starts.tolist(), *(schedule.starts + schedule.durations).tolist(), float(t_eval[-1])})
    T = T_initial
    out = np.empty_like(t_eval)
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        on = np.any((schedule.starts <= a) & (a < schedule.starts + schedule.durations))
        P = float(schedule.powers[np.argmax((schedule.starts <= a) & (a < schedule.starts + schedule.durations))]) if on else 0.0
        tau = model.tau_heat if on else model.tau_cool
        rhs = lambda t, y: [(P * model.R_thermal - y[0]) / tau]
        mask = (t_eval >= a) & (t_eval <= b)
        sol = solve_ivp(rhs, (a, b), [T], t_eval=t_eval[mask], rtol=1e-11, atol=1e-9, method="DOP853")
        out[mask] = sol.y[0]
        T = solve_ivp(rhs, (a, b), [T], rtol=1e-11, atol=1e-9, method="DOP853").y[0, -1]
    return out


def test_step_response_zero(ref_model):
    assert step_response(ref_model, 4.8, 0.0) == 0.0


def test_step_response_steady_state(geom8):
    m = ThermalModel.with_single_tau(388.0, 0.110, geom8)
    assert step_response(m, 4.8, 100.0) == pytest.approx(1862.4, rel=1e-12)


def test_step_response_rejects_negative_time(ref_model):
    with pytest.raises(ValueError):
        step_response(ref_model, 1.0, -1e-3)


def test_published_peak_inversion(geom8):
    # oracle: solve 1070 = 4.8 R (1 - exp(-75/110)) for R
    R = 1070.0 / (4.8 * (1 - math.exp(-75 / 110)))
    assert R == pytest.approx(450.97, abs=0.01)
    m = ThermalModel.with_single_tau(R, 0.110, geom8)
    assert step_response(m, 4.8, 0.075) == pytest.approx(1070.0, rel=1e-12)
    # the value 459.4 K/W gives a 1090 K rise, i.e. it solves for 1090 as a rise
    m2 = ThermalModel.with_single_tau(459.4, 0.110, geom8)
    assert step_response(m2, 4.8, 0.075) == pytest.approx(1090.0, abs=0.5)


def test_single_tau_consistency_enforced(geom8):
    with pytest.raises(ValueError):
        ThermalModel(400.0, 1e-4, 0.05, 0.05, geom8, single_tau=True)
    ThermalModel(400.0, 1e-4, 0.05, 0.11, geom8)


def test_from_envelope_scaling(geom8, published):
    m = ThermalModel.from_envelope(published, geom8)
    assert m.R_thermal == pytest.approx(6.601 / 0.017)
    assert m.tau_heat == pytest.approx(published.a * published.b)
    assert m.tau_cool == 0.110


def test_schedule_invariants():
    with pytest.raises(ValueError):
        PulseSchedule.from_pulses([(0.0, 0.02, 1.0), (0.01, 0.02, 1.0)])
    with pytest.raises(ValueError):
        PulseSchedule.from_pulses([(0.0, 0.0, 1.0)])
    with pytest.raises(ValueError):
        PulseSchedule.from_pulses([(0.0, 0.01, -1.0)])
    with pytest.raises(ValueError):
        PulseSchedule.from_pulses([(0.1, 0.01, 1.0), (0.0, 0.01, 1.0)])


def test_simulate_rejects_short_t_end(ref_model):
    with pytest.raises(ValueError):
        simulate(ref_model, PulseSchedule.single(1.0, 0.1), 0.05, 1e-3)


def test_empty_schedule_is_ambient(ref_model):
    sim = simulate(ref_model, PulseSchedule.empty(), 0.2, 1e-3)
    assert np.all(sim.wire_rise == 0)
    assert np.all(sim.air_temp == ref_model.ambient.T0)
    assert np.all(sim.force == 0) and np.all(sim.displacement == 0) and np.all(sim.pressure == 0)


def test_reference_single_pulse(ref_model):
    sim = simulate(ref_model, PulseSchedule.single(4.8, 0.075), 0.6, 1e-3)
    k = int(np.argmax(sim.force))
    assert k == 75
    assert sim.force[k] == pytest.approx(0.750, rel=1e-12)
    assert sim.displacement[k] == pytest.approx(0.96, rel=1e-12)
    assert sim.wire_temp_celsius[k] == pytest.approx(1090.0, rel=1e-12)
    assert sim.air_temp[k] - 273.15 == pytest.approx(97.0, abs=0.5)
    for ch in sim.CHANNELS:
        assert int(np.argmax(sim.channel(ch))) == k
    # decays after the pulse
    assert np.all(np.diff(sim.force[k:]) < 0)


def test_peak_force_matches_simulation(ref_model):
    sim = simulate(ref_model, PulseSchedule.single(4.8, 0.075), 0.3, 1e-3)
    assert peak_force(ref_model, 4.8, 0.075) == sim.force.max()
    assert peak_force(ref_model, 0.0, 0.015) == 0.0


def test_peak_force_monotone(ref_model):
    by_tp = [peak_force(ref_model, 3.0, t) for t in np.linspace(0.005, 0.1, 20)]
    assert np.all(np.diff(by_tp) > 0)
    by_p = [peak_force(ref_model, p, 0.015) for p in np.linspace(0.5, 8, 20)]
    assert np.all(np.diff(by_p) > 0)


def test_simulate_matches_ode_oracle(geom8, published):
    model = ThermalModel.from_envelope(published, geom8)
    sched = PulseSchedule.from_pulses([(0.01, 0.02, 3.0), (0.05, 0.005, 6.0), (0.2, 0.04, 1.5)])
    sim = simulate(model, sched, 0.4, 1e-3)
    ref = ode_oracle(model, sched, sim.time)
    np.testing.assert_allclose(sim.wire_rise, ref, rtol=1e-7, atol=1e-6)


def test_identical_pulses_after_relaxation(ref_model):
    tau = ref_model.tau_cool
    sched = PulseSchedule.from_pulses([(0.0, 0.03, 4.0), (0.03 + 20 * tau, 0.03, 4.0)])
    sim = simulate(ref_model, sched, 0.03 + 20 * tau + 0.1, 1e-3)
    split = int((0.03 + 10 * tau) / 1e-3)
    p1, p2 = sim.force[:split].max(), sim.force[split:].max()
    assert p2 == pytest.approx(p1, rel=1e-3)


def test_wire_rise_at_arbitrary_times(ref_model):
    from thermopix.thermal import wire_rise_at

    sched = PulseSchedule.single(2.0, 0.05)
    assert wire_rise_at(ref_model, sched, 0.05) == pytest.approx(step_response(ref_model, 2.0, 0.05), rel=1e-14)
    with pytest.raises(ValueError):
        wire_rise_at(ref_model, sched, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 5e-3), st.floats(0.005, 0.1), st.floats(0.1, 10.0))
def test_simulate_agrees_with_step_response(dt, t_p, P):
    model = ThermalModel.with_single_tau(450.0, 0.11, ActuatorGeometry.from_mm(8, 6))
    sim = simulate(model, PulseSchedule.single(P, t_p), t_p, dt)
    t = sim.time
    inside = t < t_p
    np.testing.assert_allclose(sim.wire_rise[inside], step_response(model, P, t[inside]), rtol=1e-12, atol=0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(1, 6))
def test_power_linearity_exact(P, n):
    model = ThermalModel.from_envelope(EnvelopeFit.published(), ActuatorGeometry.from_mm(6, 4))
    s1 = PulseSchedule.periodic(P, 20.0, 0.3, n)
    s2 = PulseSchedule.periodic(2 * P, 20.0, 0.3, n)
    a = simulate(model, s1, 0.5, 1e-3).wire_rise
    b = simulate(model, s2, 0.5, 1e-3).wire_rise
    assert np.array_equal(b, 2 * a)


def test_cooling_fit_recovers_tau_cool(geom8, published):
    model = ThermalModel.from_envelope(published, geom8)
    t_p = 0.03
    sim = simulate(model, PulseSchedule.single(4.0, t_p), 2.0, 1e-3)
    tr = sim_channel(sim, "force")
    fit = fit_tau(tr, (t_p, t_p + 0.5))
    assert fit.tau == pytest.approx(model.tau_cool, rel=5e-3)


def test_limit_cycle_settles(ref_model):
    # one period per 100 ms is the regime where ten periods span several tau
    f, duty, P = 10.0, 0.2, 3.0
    n = 25
    sim = simulate(ref_model, PulseSchedule.periodic(P, f, duty, n), n / f, 1e-4)
    spp = int(round(1 / (f * 1e-4)))
    peaks = np.array([sim.wire_rise[i * spp : (i + 1) * spp].max() for i in range(n)])
    rel = np.abs(np.diff(peaks[10:])) / peaks[11:]
    assert np.all(rel < 1e-3)


@pytest.mark.parametrize("f", [20.0, 50.0, 200.0])
def test_limit_cycle_contraction(geom8, published, f):
    """Peak error shrinks by exp(-t_p/tau_heat - t_off/tau_cool) per period."""
    model = ThermalModel.from_envelope(published, geom8)
    duty, P, n = 0.2, 3.0, 12
    t_p, t_off = duty / f, (1 - duty) / f
    q = math.exp(-t_p / model.tau_heat - t_off / model.tau_cool)
    sched = PulseSchedule.periodic(P, f, duty, n)
    from thermopix.thermal import wire_rise_at

    ends = np.arange(n) / f + t_p
    peaks = wire_rise_at(model, sched, ends)
    limit = wire_rise_at(model, sched, ends[:1], T_initial=periodic_initial_rise(model, P, f, duty))[0]
    err = limit - peaks
    np.testing.assert_allclose(err[1:] / err[:-1], q, rtol=1e-6)


def test_periodic_initial_rise_is_fixed_point(ref_model):
    f, duty, P = 25.0, 0.1, 4.0
    T0 = periodic_initial_rise(ref_model, P, f, duty)
    sched = PulseSchedule.periodic(P, f, duty, 3)
    from thermopix.thermal import wire_rise_at

    T = wire_rise_at(ref_model, sched, np.array([0.0, 1 / f, 2 / f, 3 / f]), T_initial=T0)
    np.testing.assert_allclose(T, T0, rtol=1e-12)


def test_fpp_slope_band(ref_model):
    rates = np.array([10, 20, 50, 100, 200], dtype=float)
    P, duty = 4.8, 0.1
    fpp = []
    for f in rates:
        dt = 1 / (f * 100)
        n = 30
        T0 = periodic_initial_rise(ref_model, P, f, duty)
        sim = simulate(ref_model, PulseSchedule.periodic(P, f, duty, n), n / f, dt, T_initial=T0)
        fpp.append(decompose_cyclic(sim_channel(sim, "force"), f, settle_periods=5).peak_to_peak)
    fit = linear_fit(rates, fpp, space="loglog")
    assert -1.15 <= fit.slope <= -0.85


def test_power_to_reach_inverts_step(ref_model):
    P = power_to_reach(ref_model, 800.0, 0.02)
    assert step_response(ref_model, P, 0.02) == pytest.approx(800.0, rel=1e-13)


def test_chain_gains_used(geom8):
    g = ChainGains(0.05, 2e-3)
    m = ThermalModel.with_single_tau(400.0, 0.1, geom8, gains=g)
    sim = simulate(m, PulseSchedule.single(2.0, 0.02), 0.05, 1e-3)
    np.testing.assert_allclose(sim.displacement, sim.force * 2e-3 / mm, rtol=1e-15)
    np.testing.assert_allclose(sim.air_temp - m.ambient.T0, 0.05 * sim.wire_rise, rtol=1e-12, atol=1e-12)
