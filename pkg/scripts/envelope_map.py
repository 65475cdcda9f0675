"""Failure boundary for the published fit, plus the boundary for each cavity length in W."""

import argparse
from pathlib import Path

import numpy as np

from thermopix.envelope import EnvelopeFit, boundary_rho, max_pulse_duration
from thermopix.physics import ActuatorGeometry
from thermopix.plotting import Series, save_svg
from thermopix.units import W_per_mm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/envelope")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fit = EnvelopeFit.published()
    t = np.geomspace(0.5e-3, 0.1, 200)
    rho = boundary_rho(fit, t) / W_per_mm
    save_svg(
        out / "boundary_rho.svg",
        [Series("failure boundary", t * 1e3, rho), Series("asymptote", t * 1e3, np.full_like(t, fit.asymptote / W_per_mm))],
        title="Operating envelope",
        xlabel="pulse duration (ms)",
        ylabel="rho (W/mm)",
        logx=True,
    )
    series = []
    for L in (2, 4, 6, 8, 10):
        geom = ActuatorGeometry.from_mm(L, 4)
        series.append(Series(f"L = {L} mm", t * 1e3, boundary_rho(fit, t) * geom.wire_length))
    save_svg(out / "boundary_power.svg", series, title="Failure power by cavity length", xlabel="pulse duration (ms)", ylabel="P (W)", logx=True)

    print("rho (W/mm)  max t_p (ms)")
    for r in (0.25, 0.3, 0.42, 0.5, 0.75, 1.0, 2.0):
        tp = max_pulse_duration(fit, r * W_per_mm)
        print(f"{r:9.2f}  {'unbounded' if np.isinf(tp) else f'{tp * 1e3:.2f}'}")


if __name__ == "__main__":
    main()
