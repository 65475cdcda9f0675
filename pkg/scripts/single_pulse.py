"""Single 75 ms, 4.8 W pulse on the 8 mm / 6 mm pixel with the reference model.

Writes the four chain channels to CSV and SVG and prints the peaks.
"""

import argparse
import json
from pathlib import Path

from thermopix.plotting import Series, save_svg
from thermopix.thermal import PulseSchedule, reference_model, simulate
from thermopix.traces import write_sim_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/single_pulse")
    ap.add_argument("--power", type=float, default=4.8)
    ap.add_argument("--tp-ms", type=float, default=75.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model = reference_model()
    sim = simulate(model, PulseSchedule.single(args.power, args.tp_ms * 1e-3), 0.6, 5e-4)
    write_sim_csv(sim, out / "sim.csv")
    t = sim.time * 1e3
    save_svg(
        out / "sim.svg",
        [
            Series("wire (C / 1000)", t, sim.wire_temp_celsius / 1000),
            Series("air (C / 100)", t, (sim.air_temp - 273.15) / 100),
            Series("force (N)", t, sim.force),
            Series("displacement (mm)", t, sim.displacement),
        ],
        title=f"{args.power} W, {args.tp_ms} ms pulse",
        xlabel="time (ms)",
    )
    peaks = {
        "wire_C": float(sim.wire_temp_celsius.max()),
        "air_C": float(sim.air_temp.max() - 273.15),
        "force_N": float(sim.force.max()),
        "displacement_mm": float(sim.displacement.max()),
    }
    print(json.dumps(peaks, indent=2))


if __name__ == "__main__":
    main()
