"""Command-line entry point.

Exit codes: 0 success, 2 validation or safety rejection, 1 internal error.
Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import calibration, envelope, perception, thermal, traces
from .config import ConfigError, load_config
from .driver import ScheduleError, UnsafeCommandError, board_report, compile_pattern, load_pattern, simulate_pattern, verify_log
from .envelope import FailurePoint
from .physics import power_from_rho
from .plotting import Series, save_svg
from .units import W_per_mm, celsius_to_kelvin, mm, parse_duration


class SafetyRejection(Exception):
    def __init__(self, message: str, details: dict):
        super().__init__(message)
        self.details = details


def _dump(obj) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Path):
            return str(o)
        raise TypeError(f"cannot serialize {type(o).__name__}")

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(obj), indent=2, sort_keys=True, default=default) + "\n"


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(obj))
    return path


def _out_dir(args, cfg) -> Path:
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window(text: str) -> tuple[float, float]:
    a, _, b = text.partition(":")
    if not b:
        raise argparse.ArgumentTypeError("window must look like START:STOP, e.g. 75ms:500ms")
    return parse_duration(a), parse_duration(b)


def _update_params(path: Path, section: str, values: dict) -> dict:
    doc = json.loads(path.read_text()) if path.exists() else {}
    doc[section] = values
    _write_json(path, doc)
    return doc


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args, cfg) -> dict:
    geom = cfg.geometry(args.geom)
    model = cfg.thermal_model(geom)
    t_p = parse_duration(args.tp)
    if args.power is not None:
        power = args.power
    elif args.rho is not None:
        power = power_from_rho(args.rho * W_per_mm, geom)
    elif args.voltage is not None and args.resistance is not None:
        power = args.voltage**2 / args.resistance
    else:
        raise ValueError("give --power, --rho, or --voltage with --resistance")

    report = envelope.is_safe(cfg.envelope, power / geom.wire_length, t_p, cfg.safety_margin)
    if not report.safe and not args.allow_unsafe:
        raise SafetyRejection(
            f"drive exceeds the operating envelope; max safe t_p {_ms_text(report.max_t_p)} "
            f"({_ms_text(report.boundary_t_p)} at the failure boundary)",
            report.to_dict(),
        )

    dt = parse_duration(args.sample_period)
    if args.rate:
        n = max(1, int(math.floor(parse_duration(args.duration) * args.rate + 1e-9)))
        duty = t_p * args.rate
        sched = thermal.PulseSchedule.periodic(power, args.rate, duty, n)
    else:
        sched = thermal.PulseSchedule.single(power, t_p)
    t_end = parse_duration(args.t_end) if args.t_end else sched.end + 5 * model.tau_cool
    sim = thermal.simulate(model, sched, t_end, dt)

    out = _out_dir(args, cfg)
    traces.write_sim_csv(sim, out / "sim.csv")
    t_ms = sim.time * 1e3
    save_svg(
        out / "sim.svg",
        [
            Series("wire rise / 1000 (K)", t_ms, sim.wire_rise / 1000),
            Series("air rise / 100 (K)", t_ms, (sim.air_temp - sim.ambient.T0) / 100),
            Series("force (N)", t_ms, sim.force),
            Series("displacement (mm)", t_ms, sim.displacement),
        ],
        title=f"{args.geom}: {power:.3g} W, t_p = {t_p * 1e3:.3g} ms",
        xlabel="time (ms)",
    )
    summary = {
        "geometry": args.geom,
        "power_W": power,
        "rho_W_per_mm": power / geom.wire_length / W_per_mm,
        "t_p_ms": t_p * 1e3,
        "pulses": len(sched),
        "peak_wire_rise_K": float(sim.wire_rise.max()),
        "peak_air_temp_C": float(sim.air_temp.max() - 273.15),
        "peak_force_N": float(sim.force.max()),
        "peak_displacement_mm": float(sim.displacement.max()),
        "model": {"R_thermal_K_per_W": model.R_thermal, "tau_heat_ms": model.tau_heat * 1e3, "tau_cool_ms": model.tau_cool * 1e3},
        "safety": report.to_dict(),
    }
    _write_json(out / "summary.json", summary)
    return summary


def _ms_text(t: float) -> str:
    return "unbounded" if math.isinf(t) else f"{t * 1e3:.1f} ms"


# -- envelope ---------------------------------------------------------------


def read_failure_points(path) -> list[FailurePoint]:
    """Failure-point table: header ``t_p_s,rho_W_per_mm`` plus optional ``L_mm``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(ln for ln in fh if not ln.lstrip().startswith("#"))
        if reader.fieldnames is None or not {"t_p_s", "rho_W_per_mm"} <= set(reader.fieldnames):
            raise ValueError("failure-point CSV needs columns t_p_s,rho_W_per_mm[,L_mm]")
        return [
            FailurePoint(
                float(r["rho_W_per_mm"]) * W_per_mm,
                float(r["t_p_s"]),
                float(r["L_mm"]) * mm if r.get("L_mm") else None,
            )
            for r in reader
        ]


def cmd_envelope(args, cfg) -> dict:
    out = _out_dir(args, cfg)
    fit = cfg.envelope
    if args.action == "fit":
        pts = read_failure_points(args.points)
        fit = envelope.fit_envelope(pts, T_fail=args.t_fail if args.t_fail else cfg.envelope.T_fail)
        result = fit.to_dict()
        _write_json(out / "envelope_fit.json", result)
        _update_params(Path(args.params) if args.params else out / "params.json", "envelope", result)
        t = np.geomspace(min(p.t_p for p in pts) / 2, max(p.t_p for p in pts) * 2, 200)
        save_svg(
            out / "envelope_fit.svg",
            [
                Series("failure points", [p.t_p * 1e3 for p in pts], [p.rho / W_per_mm for p in pts], "points"),
                Series("fitted boundary", t * 1e3, envelope.boundary_rho(fit, t) / W_per_mm),
            ],
            title="Operating envelope fit",
            xlabel="pulse duration (ms)",
            ylabel="rho (W/mm)",
            logx=True,
        )
        return result
    if args.action == "check":
        report = envelope.is_safe(fit, args.rho * W_per_mm, parse_duration(args.tp), cfg.safety_margin)
        result = report.to_dict()
        if not report.safe:
            raise SafetyRejection(
                f"drive outside the operating envelope; max safe t_p {_ms_text(report.max_t_p)} "
                f"({_ms_text(report.boundary_t_p)} at the failure boundary)",
                result,
            )
        return result
    lo, hi = parse_duration(args.tp_min), parse_duration(args.tp_max)
    ts = np.linspace(lo, hi, args.n)
    rows = envelope.boundary_table(fit, ts)
    with open(out / "boundary.csv", "w") as fh:
        fh.write("t_p_ms,rho_W_per_mm\n")
        for r in rows:
            fh.write(f"{'inf' if r['t_p_ms'] is None else repr(r['t_p_ms'])},{r['rho_W_per_mm']!r}\n")
    result = {"fit": fit.to_dict(), "rows": rows, "asymptote_W_per_mm": fit.asymptote / W_per_mm}
    _write_json(out / "boundary.json", result)
    save_svg(
        out / "boundary.svg",
        [Series("boundary", ts * 1e3, envelope.boundary_rho(fit, ts) / W_per_mm)],
        title="Failure boundary",
        xlabel="pulse duration (ms)",
        ylabel="rho (W/mm)",
    )
    return result


# -- calibrate --------------------------------------------------------------


def cmd_calibrate(args, cfg) -> dict:
    out = _out_dir(args, cfg)
    params = Path(args.params) if args.params else out / "params.json"
    if args.action == "tau":
        tr = traces.read_csv(Path(args.trace), args.column)
        fit = calibration.fit_tau(tr, args.window)
        result = {"tau_ms": fit.tau * 1e3, "amplitude": fit.amplitude, "baseline": fit.baseline, "r2": fit.r2, "n_samples": fit.n_samples}
        _update_params(params, "cooling", result)
        return result
    if args.action == "shunt":
        tr = traces.read_csv(Path(args.trace), args.column)
        circuit = calibration.ShuntCircuit(args.v_plus, args.r_shunt, args.r_circuit)
        r = calibration.wire_resistance_trace(tr, circuit)
        traces.write_csv(r, out / "wire_resistance.csv")
        result = {"R_wire_initial_ohm": float(r.samples[0]), "R_wire_max_ohm": float(r.samples.max())}
        table_path = args.table or cfg.resistivity_table
        if table_path:
            table = calibration.ResistivityTable.from_csv(table_path)
            T = calibration.wire_temp_from_resistance(r, table, args.smooth)
            traces.write_csv(T, out / "wire_temperature.csv")
            result.update(
                T_wire_peak_C=float(T.samples.max()),
                clamped_samples=T.metadata["clamped_samples"],
                smoothing_window=args.smooth,
            )
        _update_params(params, "wire", result)
        return result
    geom = cfg.geometry(args.geom)
    T0 = cfg.ambient.T0
    air = celsius_to_kelvin(args.air_peak_c) if args.air_peak_c is not None else None
    gains = calibration.calibrate_gains(
        celsius_to_kelvin(args.wire_peak_c), air, args.force_peak_n, args.disp_peak_mm * mm, geom, cfg.ambient
    )
    result = {"air_gain": gains.air_gain, "compliance_mm_per_N": gains.compliance / 1e-3, "T0_K": T0}
    _update_params(params, "gains", result)
    return result


# -- analyze ----------------------------------------------------------------


def cmd_analyze(args, cfg) -> dict:
    out = _out_dir(args, cfg)
    tr = traces.read_csv(Path(args.trace), args.column)
    stem = Path(args.trace).stem
    if args.mode == "decompose":
        d = traces.decompose_cyclic(tr, args.rate, args.settle)
        result = {"F0": d.offset, "Fpp": d.peak_to_peak, "window_s": list(d.window), "periods": d.periods, "unit": tr.unit}
        w = tr.window(*d.window)
        save_svg(out / f"{stem}_decompose.svg", [Series(tr.column, w.time, w.samples)], title=f"F0 = {d.offset:.4g}, Fpp = {d.peak_to_peak:.4g}", xlabel="time (s)")
    elif args.mode == "spectrum":
        cutoff = args.cutoff if args.cutoff is not None else (args.rate / 2 if args.rate else None)
        f, m = traces.magnitude_spectrum(tr, cutoff)
        k = int(np.argmax(m[1:])) + 1
        result = {"peak_frequency_Hz": float(f[k]), "peak_magnitude": float(m[k]), "bin_spacing_Hz": float(f[1]), "highpass_cutoff_Hz": cutoff}
        save_svg(out / f"{stem}_spectrum.svg", [Series("magnitude", f, m)], title="Magnitude spectrum", xlabel="frequency (Hz)")
    elif args.mode == "endurance":
        groups = traces.peak_stats(tr, args.group, window=2.0 / args.rate if args.rate else None)
        means = np.array([g[1] for g in groups])
        grand = float(means.mean())
        result = {
            "groups": len(groups),
            "group_size": args.group,
            "grand_mean": grand,
            "max_relative_deviation": float(np.max(np.abs(means - grand)) / abs(grand)),
            "group_means": means.tolist(),
        }
        save_svg(out / f"{stem}_endurance.svg", [Series("group mean", np.arange(len(means)), means, "points")], title="Endurance", xlabel="group")
    else:
        window = parse_duration(args.window) if args.window else None
        result = {"delta_T_surf_K": traces.surface_temp_stats(tr, window)}
    result["mode"] = args.mode
    _write_json(out / f"{stem}_{args.mode}.json", result)
    return result


# -- schedule ---------------------------------------------------------------


def cmd_schedule(args, cfg) -> dict:
    out = _out_dir(args, cfg)
    margin = cfg.safety_margin if args.margin is None else args.margin
    if margin < cfg.safety_margin and not args.ack_margin:
        raise ValueError(f"margin {margin} is below the configured {cfg.safety_margin}; pass --ack-margin to accept")
    commands, modules = load_pattern(args.pattern)
    log = compile_pattern(commands, modules, cfg.envelope, margin)
    problems = verify_log(log, modules, cfg.envelope, margin)
    if problems:
        raise RuntimeError(f"compiled log failed re-verification: {problems[:3]}")
    log.to_csv(out / "events.csv")
    rep = board_report(log).to_dict()
    rep["channels"] = {str(ch): {"pulses": log.pulse_count[ch], "on_time_us": log.on_time_us[ch], "energy_J": log.energy[ch]} for ch in log.channels}
    rep["margin"] = margin
    if args.simulate:
        geoms = {ch: g for m in modules for ch, g in zip(m.channels, m.geometries)}
        models = {ch: cfg.thermal_model(geoms[ch]) for ch in log.channels}
        dt = parse_duration(args.sample_period)
        sims = simulate_pattern(log, models, dt, log.end_us / 1e6 + 0.5)
        for ch, sim in sims.items():
            traces.write_sim_csv(sim, out / f"channel_{ch:02d}.csv")
        rep["peak_force_N"] = {str(ch): float(s.force.max()) for ch, s in sims.items()}
    _write_json(out / "board_report.json", rep)
    return rep


# -- intensity --------------------------------------------------------------


def cmd_intensity(args, cfg) -> dict:
    if args.model:
        doc = json.loads(Path(args.model).read_text())
        model = perception.IntensityModel(doc["slope_per_W"], doc["intercept"], doc.get("r2", 1.0))
    elif args.ratings:
        ds = perception.MagnitudeDataset.from_csv(args.ratings)
        model = perception.fit_intensity_model(perception.reduce_magnitude(ds, restore_scale=args.restore_scale))
    else:
        model = perception.IntensityModel.published()
    result = {"model": {"slope_per_W": model.slope, "intercept": model.intercept, "r2": model.r2}}
    if args.power is not None:
        result["intensity"] = perception.intensity_for_power(model, args.power)
        return result
    if args.target is None:
        return result
    geom = cfg.geometry(args.geom)
    t_p = parse_duration(args.tp)
    check = perception.power_for_intensity(model, args.target, geom, t_p, cfg.envelope, cfg.safety_margin)
    result.update(
        power_W=check.power,
        safe=check.safe,
        max_safe_power_W=check.max_safe_power,
        max_safe_t_p_ms=None if check.max_safe_t_p is None or math.isinf(check.max_safe_t_p) else check.max_safe_t_p * 1e3,
    )
    if not check.safe:
        raise SafetyRejection(f"intensity {args.target} needs {check.power:.3g} W, above the safe {check.max_safe_power:.3g} W", result)
    return result


# -- wiring -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermopix", description="Thermopneumatic pixel modeling and drive planning")
    p.add_argument("--config", help="project config JSON (default: $THERMOPIX_CONFIG)")
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    # same options accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a pulse or pulse train")
    s.add_argument("--geom", default="L8D6")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--power", type=float, help="electrical power (W)")
    g.add_argument("--rho", type=float, help="power per wire length (W/mm)")
    g.add_argument("--voltage", type=float, help="wire voltage (V); needs --resistance")
    s.add_argument("--resistance", type=float, help="wire resistance (ohm)")
    s.add_argument("--tp", required=True, help="pulse duration, e.g. 75ms")
    s.add_argument("--rate", type=float, help="pulse rate (Hz) for a train")
    s.add_argument("--duration", default="1s", help="train duration")
    s.add_argument("--sample-period", default="0.5ms")
    s.add_argument("--t-end")
    s.add_argument("--allow-unsafe", action="store_true", help="simulate even outside the envelope")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("envelope", parents=[common], help="boundary table, safety check, or fit")
    e.add_argument("action", choices=["table", "check", "fit"])
    e.add_argument("--tp-min", default="1ms")
    e.add_argument("--tp-max", default="100ms")
    e.add_argument("--n", type=int, default=100)
    e.add_argument("--points", help="failure-point CSV (fit)")
    e.add_argument("--t-fail", type=float)
    e.add_argument("--rho", type=float, help="W/mm (check)")
    e.add_argument("--tp", help="pulse duration (check)")
    e.add_argument("--params", help="parameter JSON to update")
    e.set_defaults(func=cmd_envelope)

    c = sub.add_parser("calibrate", parents=[common], help="fit tau, invert shunt traces, or derive chain gains")
    c.add_argument("action", choices=["tau", "shunt", "gains"])
    c.add_argument("--trace")
    c.add_argument("--column")
    c.add_argument("--window", type=_window, help="START:STOP for tau, e.g. 75ms:500ms")
    c.add_argument("--v-plus", type=float)
    c.add_argument("--r-shunt", type=float, default=0.22)
    c.add_argument("--r-circuit", type=float, default=2.1)
    c.add_argument("--table", help="resistivity table CSV")
    c.add_argument("--smooth", type=int, default=5)
    c.add_argument("--geom", default="L8D6")
    c.add_argument("--wire-peak-c", type=float)
    c.add_argument("--air-peak-c", type=float)
    c.add_argument("--force-peak-n", type=float)
    c.add_argument("--disp-peak-mm", type=float)
    c.add_argument("--params", help="parameter JSON to update")
    c.set_defaults(func=cmd_calibrate)

    a = sub.add_parser("analyze", parents=[common], help="reduce a measured or simulated trace")
    a.add_argument("mode", choices=["decompose", "spectrum", "endurance", "surface"])
    a.add_argument("--trace", required=True)
    a.add_argument("--column")
    a.add_argument("--rate", type=float)
    a.add_argument("--settle", type=int, default=5)
    a.add_argument("--cutoff", type=float)
    a.add_argument("--group", type=int, default=90)
    a.add_argument("--window")
    a.set_defaults(func=cmd_analyze)

    sc = sub.add_parser("schedule", parents=[common], help="compile a pattern file into gate events")
    sc.add_argument("pattern")
    sc.add_argument("--margin", type=float)
    sc.add_argument("--ack-margin", action="store_true", help="accept a margin below the configured one")
    sc.add_argument("--simulate", action="store_true")
    sc.add_argument("--sample-period", default="0.5ms")
    sc.set_defaults(func=cmd_schedule)

    i = sub.add_parser("intensity", parents=[common], help="map perceived intensity to drive power or back")
    i.add_argument("--target", type=float)
    i.add_argument("--power", type=float)
    i.add_argument("--model", help="intensity model JSON (slope_per_W, intercept)")
    i.add_argument("--ratings", help="magnitude-estimation CSV to fit the model from")
    i.add_argument("--restore-scale", action="store_true")
    i.add_argument("--geom", default="L10D8")
    i.add_argument("--tp", default="10ms")
    i.set_defaults(func=cmd_intensity)
    return p


def _check_args(args):
    if args.command == "calibrate":
        need = {"tau": ["trace", "window"], "shunt": ["trace", "v_plus"], "gains": ["wire_peak_c", "force_peak_n", "disp_peak_mm"]}[args.action]
        missing = [n for n in need if getattr(args, n) is None]
        if missing:
            raise ValueError(f"calibrate {args.action} needs --{', --'.join(m.replace('_', '-') for m in missing)}")
    if args.command == "envelope":
        if args.action == "fit" and not args.points:
            raise ValueError("envelope fit needs --points")
        if args.action == "check" and (args.rho is None or args.tp is None):
            raise ValueError("envelope check needs --rho and --tp")
    if args.command == "analyze" and args.mode == "decompose" and args.rate is None:
        raise ValueError("analyze decompose needs --rate")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_args(args)
        cfg = load_config(args.config)
        result = args.func(args, cfg)
    except SafetyRejection as exc:
        sys.stderr.write(_dump({"error": "SafetyRejection", "message": str(exc), "details": exc.details}))
        return 2
    except UnsafeCommandError as exc:
        sys.stderr.write(_dump({"error": "UnsafeCommand", "message": str(exc), "channel": exc.channel, "details": exc.report.to_dict()}))
        return 2
    except (ValueError, ConfigError, ScheduleError, FileNotFoundError) as exc:
        sys.stderr.write(_dump({"error": type(exc).__name__, "message": str(exc)}))
        return 2
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(_dump({"error": type(exc).__name__, "message": str(exc), "internal": True}))
        return 1
    sys.stdout.write(_dump(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
