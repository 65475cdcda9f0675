"""Settled peak-to-peak force against pulse rate at fixed power and duty."""

import argparse
import json
from pathlib import Path

import numpy as np

from thermopix.calibration import linear_fit
from thermopix.plotting import Series, save_svg
from thermopix.thermal import PulseSchedule, periodic_initial_rise, reference_model, simulate
from thermopix.traces import decompose_cyclic, sim_channel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/fpp")
    ap.add_argument("--power", type=float, default=4.8)
    ap.add_argument("--duty", type=float, default=0.1)
    ap.add_argument("--rates", type=float, nargs="+", default=[10, 15, 20, 25, 50, 75, 100, 150, 200])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model = reference_model()
    rates = np.array(args.rates, dtype=float)
    rows = []
    for f in rates:
        n = 30
        T0 = periodic_initial_rise(model, args.power, f, args.duty)
        sim = simulate(model, PulseSchedule.periodic(args.power, f, args.duty, n), n / f, 1 / (100 * f), T_initial=T0)
        d = decompose_cyclic(sim_channel(sim, "force"), f)
        rows.append({"rate_Hz": float(f), "F0_N": d.offset, "Fpp_N": d.peak_to_peak})
    fpp = np.array([r["Fpp_N"] for r in rows])
    fit = linear_fit(rates, fpp, space="loglog")
    save_svg(
        out / "fpp_vs_rate.svg",
        [Series("simulated", rates, fpp, "points"), Series(f"fit, slope {fit.slope:.3f}", rates, fit.predict(rates))],
        title="Pulse-synchronous force",
        xlabel="pulse rate (Hz)",
        ylabel="F_pp (N)",
        logx=True,
        logy=True,
    )
    result = {"rows": rows, "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    (out / "fpp_vs_rate.json").write_text(json.dumps(result, indent=2))
    print(json.dumps({k: result[k] for k in ("slope", "intercept", "r2")}, indent=2))


if __name__ == "__main__":
    main()
