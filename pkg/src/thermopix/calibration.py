"""Parameter extraction from measured traces.

Covers the cooling time constant, the shunt-voltage route to wire resistance
and temperature, chain gains from a single calibrated peak, and ordinary
least-squares lines in linear or log-log space.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .physics import ActuatorGeometry, AmbientState, ChainGains, force_from_air_temp
from .traces import Trace, TraceError


class FitError(ValueError):
    """A fit could not produce a meaningful result."""


class CalibrationWarning(UserWarning):
    pass


# -- exponential cooling --------------------------------------------------


@dataclass(frozen=True)
class TauFit:
    tau: float
    amplitude: float
    baseline: float
    r2: float
    n_samples: int


def fit_tau(trace: Trace, window: tuple[float, float], baseline: float | None = None, tail_fraction: float = 0.1) -> TauFit:
    """Fit ``y(t) = y0 exp(-(t - t_start) / tau)`` to the samples inside ``window``.

    The baseline defaults to the mean of the last ``tail_fraction`` of the
    whole trace. A weighted log-linear fit provides the starting point and a
    nonlinear least-squares pass on the raw residuals finishes it.
    """
    start, stop = window
    try:
        w = trace.window(start, stop)
    except TraceError as exc:
        raise FitError(str(exc)) from exc
    if len(w) < 10:
        raise FitError(f"window holds {len(w)} samples; need at least 10")
    if baseline is None:
        n_tail = max(1, int(round(tail_fraction * len(trace))))
        baseline = float(np.mean(trace.samples[-n_tail:]))
    t = w.time - start
    y = w.samples - baseline

    pos = y > 0
    if pos.sum() < 3:
        raise FitError("no decaying signal above baseline in the window")
    # weights y make the log-space residuals comparable to linear-space ones
    slope, intercept = np.polyfit(t[pos], np.log(y[pos]), 1, w=y[pos])
    if not slope < 0:
        raise FitError(f"window is not decaying (log slope {slope:.4g} 1/s)")

    def resid(p):
        return p[0] * np.exp(-t * p[1]) - y

    def jac(p):
        e = np.exp(-t * p[1])
        return np.column_stack([e, -t * p[0] * e])

    sol = optimize.least_squares(resid, x0=[math.exp(intercept), -slope], jac=jac, method="lm")
    y0, rate = sol.x
    if not (np.isfinite(rate) and rate > 0 and np.isfinite(y0)):
        raise FitError(f"fit diverged (decay rate {rate!r})")
    ss_res = float(np.sum(sol.fun**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else -math.inf)
    return TauFit(tau=1.0 / rate, amplitude=float(y0), baseline=baseline, r2=r2, n_samples=len(w))


# -- shunt inversion ------------------------------------------------------


@dataclass(frozen=True)
class ShuntCircuit:
    """Series shunt used to read wire current; defaults match the bench circuit."""

    V_plus: float
    R_shunt: float = 0.22
    R_circuit: float = 2.1

    def __post_init__(self):
        if not (self.V_plus > 0 and self.R_shunt > 0 and self.R_circuit > 0):
            raise ValueError("shunt circuit values must all be strictly positive")

    def shunt_voltage(self, R_wire):
        """Forward voltage-divider model: shunt voltage for a given wire resistance."""
        R_wire = np.asarray(R_wire, dtype=float)
        return self.V_plus * self.R_shunt / (R_wire + self.R_shunt + self.R_circuit)


def wire_resistance_trace(shunt: Trace, circuit: ShuntCircuit) -> Trace:
    v = shunt.require("shunt_voltage", "V").samples
    bad = np.flatnonzero(~(v > 0))
    if bad.size:
        raise TraceError(f"shunt voltage must be positive; sample {bad[0]} is {v[bad[0]]!r}")
    R_tot = circuit.V_plus * circuit.R_shunt / v
    R_wire = R_tot - circuit.R_shunt - circuit.R_circuit
    return Trace("resistance", "ohm", shunt.sample_period, R_wire, shunt.t0, dict(shunt.metadata))


@dataclass(frozen=True)
class ResistivityTable:
    """Relative resistivity versus temperature (C), normalized to the first row.

    Inversion needs the resistivity column strictly increasing as well.
    """

    temperatures: np.ndarray
    relative: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.temperatures, dtype=float).ravel()
        r = np.asarray(self.relative, dtype=float).ravel()
        if T.size != r.size or T.size < 2:
            raise ValueError("resistivity table needs at least two (temperature, resistivity) rows")
        if np.any(np.diff(T) <= 0):
            raise ValueError("table temperatures must be strictly increasing")
        if np.any(r <= 0):
            raise ValueError("relative resistivity must be positive")
        r = r / r[0]
        if np.any(np.diff(r) <= 0):
            raise ValueError("relative resistivity must increase strictly with temperature to be invertible")
        for arr in (T, r):
            arr.setflags(write=False)
        object.__setattr__(self, "temperatures", T)
        object.__setattr__(self, "relative", r)

    @classmethod
    def from_csv(cls, path) -> "ResistivityTable":
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        reader = csv.DictReader(lines)
        if reader.fieldnames is None or set(reader.fieldnames) != {"temp_C", "rel_resistivity"}:
            raise ValueError("resistivity table header must be 'temp_C,rel_resistivity'")
        rows = [(float(r["temp_C"]), float(r["rel_resistivity"])) for r in reader]
        return cls(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("temp_C,rel_resistivity\n")
            for T, r in zip(self.temperatures, self.relative):
                fh.write(f"{float(T)!r},{float(r)!r}\n")

    @property
    def reference_temperature(self) -> float:
        return float(self.temperatures[0])

    def temperature(self, ratio):
        return np.interp(ratio, self.relative, self.temperatures)

    def ratio(self, temperature):
        return np.interp(temperature, self.temperatures, self.relative)


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; near the edges only the available samples are averaged."""
    if window < 1:
        raise ValueError("smoothing window must be at least 1 sample")
    if window == 1:
        return np.array(x, dtype=float)
    kernel = np.ones(window)
    num = np.convolve(x, kernel, mode="same")
    den = np.convolve(np.ones_like(x, dtype=float), kernel, mode="same")
    return num / den


def wire_temp_from_resistance(r_trace: Trace, table: ResistivityTable, smoothing_window: int = 5) -> Trace:
    """Wire temperature (C) from a resistance trace referenced to its first sample.

    Ratios outside the table are clamped to its ends; the count of clamped
    samples is stored under ``metadata["clamped_samples"]``.
    """
    r = r_trace.require("resistance").samples
    if not r[0] > 0:
        raise TraceError("first resistance sample must be positive")
    ratio = r / r[0]
    lo, hi = table.relative[0], table.relative[-1]
    clamped = int(np.count_nonzero((ratio < lo) | (ratio > hi)))
    if clamped:
        warnings.warn(f"{clamped} samples fall outside the resistivity table and were clamped", CalibrationWarning, stacklevel=2)
    temps = moving_average(table.temperature(ratio), smoothing_window)
    meta = dict(r_trace.metadata)
    meta["clamped_samples"] = clamped
    return Trace("temperature", "C", r_trace.sample_period, temps, r_trace.t0, meta)


# -- chain gains ----------------------------------------------------------


def calibrate_gains(
    wire_peak: float,
    air_peak: float | None,
    force_peak: float,
    displacement_peak: float,
    geom: ActuatorGeometry,
    ambient: AmbientState = AmbientState(),
    tolerance: float = 0.05,
) -> ChainGains:
    """Chain gains from one simultaneous peak observation.

    Temperatures are absolute (K), displacement in m. If ``air_peak`` is None it
    is inferred from the force via the ideal gas law. A force that disagrees with
    the air temperature by more than ``tolerance`` raises a CalibrationWarning.
    """
    if not (force_peak > 0 and displacement_peak > 0):
        raise ValueError("force and displacement peaks must be positive")
    wire_rise = wire_peak - ambient.T0
    if not wire_rise > 0:
        raise ValueError("wire peak must be above ambient")
    if air_peak is None:
        from .physics import air_temp_from_force

        air_peak = air_temp_from_force(force_peak, geom, ambient)
    air_rise = air_peak - ambient.T0
    if not air_rise > 0:
        raise ValueError("air peak must be above ambient")
    implied = force_from_air_temp(air_peak, geom, ambient)
    mismatch = abs(implied - force_peak) / force_peak
    if mismatch > tolerance:
        warnings.warn(
            f"air temperature implies {implied:.4g} N but force peak is {force_peak:.4g} N ({mismatch:.1%} apart)",
            CalibrationWarning,
            stacklevel=2,
        )
    return ChainGains(air_gain=air_rise / wire_rise, compliance=displacement_peak / force_peak)


# -- regression -----------------------------------------------------------


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r2: float
    residuals: np.ndarray
    space: str = "linear"

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if self.space == "loglog":
            return 10.0 ** (self.slope * np.log10(x) + self.intercept)
        return self.slope * x + self.intercept


def linear_fit(x, y, space: str = "linear") -> RegressionFit:
    """Ordinary least squares line; ``space="loglog"`` fits log10(y) on log10(x).

    A zero-variance response fitted with zero residual reports r^2 = 1.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    if space == "loglog":
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("log-log fit requires strictly positive data")
        x, y = np.log10(x), np.log10(y)
    elif space != "linear":
        raise ValueError(f"unknown fit space {space!r}")
    if np.unique(x).size < 2:
        raise ValueError("need at least two distinct x values")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(y - ym, y - ym))
    if ss_tot == 0:
        r2 = 1.0 if ss_res <= 1e-30 else -math.inf
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RegressionFit(slope, intercept, r2, resid, space)
