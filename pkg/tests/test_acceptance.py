"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured values.
Run standalone (``python3 tests/test_acceptance.py``) for just the summary.
"""

import math

import numpy as np
import pytest

from thermopix.calibration import ResistivityTable, ShuntCircuit, fit_tau, linear_fit, wire_resistance_trace, wire_temp_from_resistance
from thermopix.driver import ModuleConfig, PatternCommand, compile_pattern, verify_log
from thermopix.envelope import EnvelopeFit, FailurePoint, boundary_rho, fit_envelope, is_safe, max_pulse_duration
from thermopix.perception import IntensityModel, MagnitudeDataset, fit_intensity_model, intensity_for_power, power_for_intensity, reduce_magnitude
from thermopix.physics import ActuatorGeometry, air_temp_from_force
from thermopix.thermal import PulseSchedule, ThermalModel, periodic_initial_rise, power_to_reach, reference_model, simulate, step_response
from thermopix.traces import Trace, decompose_cyclic, magnitude_spectrum, peak_stats, sim_channel
from thermopix.units import W_per_mm, kelvin_to_celsius, mm_K_per_W, ms, uJ_per_mm_K

PUBLISHED = EnvelopeFit.published()
A, B = 6601 * mm_K_per_W, 6.51 * uJ_per_mm_K


def report(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2} {name}: {detail}"
    print(line)
    return ok


def criterion_1():
    T = kelvin_to_celsius(air_temp_from_force(0.75, ActuatorGeometry.from_mm(8, 6)))
    return report(1, "ideal-gas inference", abs(T - 97.0) <= 1.0, f"T_air = {T:.2f} C (97 +/- 1)")


def criterion_2():
    asym = PUBLISHED.asymptote / W_per_mm
    t_half = max_pulse_duration(PUBLISHED, 0.5 * W_per_mm) / ms
    endurance = is_safe(PUBLISHED, 0.42 * W_per_mm, 19 * ms).safe
    long_pulse = is_safe(PUBLISHED, 0.5 * W_per_mm, 30 * ms).safe
    ok = abs(asym - 0.2121) <= 1e-4 and abs(t_half - 23.7) <= 0.2 and endurance and not long_pulse
    return report(
        2, "envelope point checks", ok,
        f"asymptote {asym:.5f} W/mm, t_max(0.5) {t_half:.2f} ms, (0.42, 19 ms) safe={endurance}, (0.5, 30 ms) safe={long_pulse}",
    )


def _points(noise_rng=None):
    fit = EnvelopeFit(A, B)
    pts = []
    for t in (5, 10, 20, 40, 80):
        rho = boundary_rho(fit, t * ms)
        if noise_rng is not None:
            rho *= math.exp(0.01 * noise_rng.standard_normal())
        pts.append(FailurePoint(rho, t * ms))
    return pts


def criterion_3():
    clean = fit_envelope(_points())
    err0 = max(abs(clean.a / A - 1), abs(clean.b / B - 1))
    errs, r2s = [], []
    for seed in range(100):
        f = fit_envelope(_points(np.random.default_rng(seed)))
        errs.append(max(abs(f.a / A - 1), abs(f.b / B - 1)))
        r2s.append(f.r2)
    ok = err0 < 1e-3 and max(errs) < 0.05 and np.median(r2s) >= 0.98
    return report(
        3, "envelope fit recovery", ok,
        f"noiseless err {err0:.2e}; 1% noise worst err {max(errs):.2%}, median r2 {np.median(r2s):.4f}",
    )


def criterion_4():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        L = rng.uniform(2, 10)
        t_p = math.exp(rng.uniform(math.log(0.5e-3), math.log(0.1)))
        geom = ActuatorGeometry.from_mm(L, 4)
        model = ThermalModel.from_envelope(PUBLISHED, geom)
        P = power_to_reach(model, PUBLISHED.T_fail, t_p)
        assert step_response(model, P, t_p) == pytest.approx(PUBLISHED.T_fail, rel=1e-12)
        worst = max(worst, abs(P / (boundary_rho(PUBLISHED, t_p) * geom.wire_length) - 1))
    return report(4, "lumped model vs envelope", worst < 1e-9, f"max relative mismatch {worst:.2e} over 20 random (L, t_p)")


def criterion_5():
    model = ThermalModel.from_envelope(PUBLISHED, ActuatorGeometry.from_mm(8, 6))
    t_p = 30 * ms
    sim = simulate(model, PulseSchedule.single(4.0, t_p), 2.0, 1e-3)
    force = sim_channel(sim, "force")
    window = (t_p, t_p + 0.6)
    clean = fit_tau(force, window, baseline=0.0)
    err0 = abs(clean.tau / model.tau_cool - 1)
    errs, r2s = [], []
    peak = force.samples.max()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        noisy = Trace("force", "N", force.sample_period, force.samples + 0.02 * peak * rng.standard_normal(len(force)))
        f = fit_tau(noisy, window)
        errs.append(abs(f.tau / model.tau_cool - 1))
        r2s.append(f.r2)
    ok = err0 < 5e-3 and max(errs) < 0.03 and min(r2s) >= 0.98
    return report(
        5, "cooling-fit loop", ok,
        f"noiseless tau err {err0:.2e}; 2% noise worst err {max(errs):.2%}, min r2 {min(r2s):.4f}",
    )


def criterion_6():
    model = reference_model()
    rates = np.array([10, 20, 50, 100, 200], dtype=float)
    P, duty = 4.8, 0.1
    fpp = []
    for f in rates:
        n = 30
        T0 = periodic_initial_rise(model, P, f, duty)
        sim = simulate(model, PulseSchedule.periodic(P, f, duty, n), n / f, 1 / (100 * f), T_initial=T0)
        fpp.append(decompose_cyclic(sim_channel(sim, "force"), f, settle_periods=5).peak_to_peak)
    fit = linear_fit(rates, fpp, space="loglog")
    ok = -1.15 <= fit.slope <= -0.85
    return report(6, "F_pp rate scaling", ok, f"log-log slope {fit.slope:.3f} (band [-1.15, -0.85]), F_pp {fpp[0] * 1e3:.0f} to {fpp[-1] * 1e3:.1f} mN")


def criterion_7():
    model = reference_model()
    f0 = 25.0
    T0 = periodic_initial_rise(model, 4.8, f0, 0.1)
    sim = simulate(model, PulseSchedule.periodic(4.8, f0, 0.1, 50), 1.999, 1e-3, T_initial=T0)
    freqs, mags = magnitude_spectrum(sim_channel(sim, "force"), highpass_cutoff=f0 / 2)
    dominant = freqs[np.argmax(mags)]
    floor = np.median(mags)
    harm = [mags[int(np.argmin(np.abs(freqs - h * f0)))] / floor for h in (2, 3)]
    ok = abs(dominant - f0) < 0.5 * freqs[1] and min(harm) > 10
    return report(7, "spectrum peaks", ok, f"dominant {dominant:.2f} Hz; 50/75 Hz at {harm[0]:.0f}x / {harm[1]:.0f}x the median floor")


def criterion_8():
    def true_ratio(T):
        d = T - 20.0
        return 1.0 + 1.1e-4 * d - 2.5e-8 * d**2

    temps = np.arange(20.0, 1401.0, 100.0)
    table = ResistivityTable(temps, true_ratio(temps))
    # bound on the table's interpolation error, evaluated independently on a dense grid
    dense = np.linspace(temps[0], temps[-1], 200_001)
    bound = float(np.max(np.abs(np.interp(true_ratio(dense), table.relative, table.temperatures) - dense)))

    model = ThermalModel.from_envelope(PUBLISHED, ActuatorGeometry.from_mm(8, 6))
    sim = simulate(model, PulseSchedule.single(3.0, 40 * ms), 0.3, 1e-4)
    T_true = 20.0 + sim.wire_rise
    R0 = 9.5
    R_true = R0 * true_ratio(T_true)
    circuit = ShuntCircuit(12.0)
    shunt = Trace("shunt_voltage", "V", sim.sample_period, circuit.shunt_voltage(R_true))
    R_back = wire_resistance_trace(shunt, circuit)
    r_err = float(np.max(np.abs(R_back.samples / R_true - 1)))
    T_back = wire_temp_from_resistance(R_back, table, smoothing_window=1)
    t_err = float(np.max(np.abs(T_back.samples - T_true)))
    ok = r_err < 1e-12 and t_err <= bound + 1e-6
    return report(8, "shunt inversion pipeline", ok, f"R_wire rel err {r_err:.1e}; T err {t_err:.3f} K (table bound {bound:.3f} K)")


def criterion_9():
    rng = np.random.default_rng(9)
    truth = IntensityModel.published()
    powers = [1.2, 2.4, 3.6, 4.8, 6.0]
    log_s = rng.normal(0.0, 0.7, 10)
    scales = np.exp(log_s - log_s.mean())  # panel scale is identifiable only up to this normalization
    rows = [
        (f"p{i}", P, s * intensity_for_power(truth, P))
        for i, s in enumerate(scales)
        for P in powers
        for _ in range(7)
    ]
    model = fit_intensity_model(reduce_magnitude(MagnitudeDataset.from_rows(rows), restore_scale=True))
    ea = abs(model.slope / truth.slope - 1)
    eb = abs(model.intercept / truth.intercept - 1)
    worst = 0.0
    for I in np.linspace(0.2, 1.5, 14):
        P = power_for_intensity(model, I).power
        worst = max(worst, abs(intensity_for_power(model, P) / I - 1))
    ok = ea < 0.02 and eb < 0.02 and worst < 1e-12
    return report(9, "perception round trip", ok, f"alpha err {ea:.2e}, beta err {eb:.2e}, inverse err {worst:.1e}")


def criterion_10():
    geom = ActuatorGeometry.from_mm(8, 6)
    one = [ModuleConfig.uniform(0, "single", geom, 10.0)]
    stim = PatternCommand((0,), rate=20.0, duty=0.2, duration=0.5, power=2.8)
    log = compile_pattern([stim], one, PUBLISHED)
    pulses = log.pulses[0]
    exact = len(pulses) == 10 and all(d == 10_000 for _, d, _ in pulses)
    exact &= [s for s, _, _ in pulses] == list(range(0, 500_000, 50_000))
    ledger = log.on_time_us[0] == 10_000 * 10 and log.energy[0] == 2.8 * (10_000 * 10) / 1_000_000

    board = [ModuleConfig.uniform(i, "quartet", geom, 10.0) for i in range(10)]
    cmds = [PatternCommand(tuple(range(40)), rate=20.0, duty=0.2, duration=0.5, power=2.8)]
    cmds.append(PatternCommand((5, 17, 33), rate=37.0, duty=0.15, duration=0.8, start=0.6, power=1.5))
    big = compile_pattern(cmds, board, PUBLISHED)
    problems = verify_log(big, board, PUBLISHED)
    again = compile_pattern(cmds, board, PUBLISHED)
    same = big.to_csv() == again.to_csv() and big == again
    ok = exact and ledger and not problems and same and len(big.channels) == 40
    return report(
        10, "scheduler exactness", ok,
        f"10 x 10 ms pulses={exact}, energy ledger exact={ledger}, 40-channel re-verify problems={len(problems)}, repeatable={same}",
    )


def criterion_11():
    geom = ActuatorGeometry.from_mm(8, 6)
    model = ThermalModel.from_envelope(PUBLISHED, geom)
    # 5 Hz keeps the accumulated rise below the failure rise; faster trains do not
    f, t_p = 5.0, 19 * ms
    P = 0.42 * W_per_mm * geom.wire_length
    duty = t_p * f
    T0 = periodic_initial_rise(model, P, f, duty)
    n = 54_000
    sim = simulate(model, PulseSchedule.periodic(P, f, duty, n), n / f, 4e-3, T_initial=T0)
    groups = peak_stats(sim_channel(sim, "displacement"), 90, window=2 / f)
    means = np.array([g for _, g in groups])
    dev = float(np.max(np.abs(means / means.mean() - 1)))
    below_failure = sim.wire_rise.max() < PUBLISHED.T_fail
    ok = len(groups) == 600 and dev < 0.01 and below_failure
    return report(
        11, "endurance statistics", ok,
        f"{len(groups)} groups of 90, max deviation {dev:.1e}, peak wire rise {sim.wire_rise.max():.0f} K",
    )


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 12)])
def test_criterion(check, capsys):
    with capsys.disabled():
        print()
        ok = check()
    assert ok


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
