"""Long constant-drive run grouped into blocks of peaks (54,000 pulses by default)."""

import argparse
import json
from pathlib import Path

import numpy as np

from thermopix.envelope import EnvelopeFit, is_safe
from thermopix.physics import ActuatorGeometry
from thermopix.plotting import Series, save_svg
from thermopix.thermal import PulseSchedule, ThermalModel, periodic_initial_rise, simulate
from thermopix.traces import peak_stats, sim_channel
from thermopix.units import W_per_mm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/endurance")
    ap.add_argument("--rho", type=float, default=0.42, help="W/mm")
    ap.add_argument("--tp-ms", type=float, default=19.0)
    ap.add_argument("--rate", type=float, default=5.0)
    ap.add_argument("--sample-period", type=float, default=4e-3, help="s")
    ap.add_argument("--pulses", type=int, default=54_000)
    ap.add_argument("--group", type=int, default=90)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fit = EnvelopeFit.published()
    geom = ActuatorGeometry.from_mm(8, 6)
    model = ThermalModel.from_envelope(fit, geom)
    t_p = args.tp_ms * 1e-3
    safety = is_safe(fit, args.rho * W_per_mm, t_p, 0.10)
    P = args.rho * W_per_mm * geom.wire_length
    duty = t_p * args.rate
    T0 = periodic_initial_rise(model, P, args.rate, duty)
    sim = simulate(model, PulseSchedule.periodic(P, args.rate, duty, args.pulses), args.pulses / args.rate, args.sample_period, T_initial=T0)
    groups = peak_stats(sim_channel(sim, "displacement"), args.group, window=2 / args.rate)
    means = np.array([m for _, m in groups])
    save_svg(out / "endurance.svg", [Series("group mean", np.arange(len(means)), means, "points")], title="Displacement per group", xlabel="group", ylabel="mm")
    result = {
        "safe_with_10pct_margin": safety.safe,
        "groups": len(groups),
        "mean_displacement_mm": float(means.mean()),
        "max_relative_deviation": float(np.max(np.abs(means / means.mean() - 1))),
        "peak_wire_rise_K": float(sim.wire_rise.max()),
        "failure_rise_K": fit.T_fail,
    }
    (out / "endurance.json").write_text(json.dumps(result, indent=2))
    print(json.dumps(result, indent=2))


if __name__ == "__main__":
    main()
