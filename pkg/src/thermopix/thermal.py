"""First-order lumped thermal model of the heating wire and its downstream chain.

The wire temperature rise obeys ``C dT/dt = P - T / R_thermal``. Between
breakpoints of a pulse schedule the solution is an exact exponential, so the
simulator propagates the state segment by segment in closed form and then
evaluates every sample from the state at the start of its segment. Air
temperature, pressure, force and displacement follow from memoryless gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .physics import (
    ActuatorGeometry,
    AmbientState,
    ChainGains,
    air_temp_from_force,
)
from .units import mm


@dataclass(frozen=True)
class ThermalModel:
    """Lumped wire model for one pixel.

    ``tau_heat`` governs segments with power applied, ``tau_cool`` the gaps.
    With ``single_tau=True`` both must equal ``R_thermal * heat_capacity``.
    ``T_fail`` is the failure temperature rise over ambient, in K.
    """

    R_thermal: float
    heat_capacity: float
    tau_heat: float
    tau_cool: float
    geometry: ActuatorGeometry
    ambient: AmbientState = AmbientState()
    gains: ChainGains = ChainGains()
    T_fail: float = 1400.0
    single_tau: bool = False

    def __post_init__(self):
        for name in ("R_thermal", "heat_capacity", "tau_heat", "tau_cool", "T_fail"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.single_tau:
            rc = self.R_thermal * self.heat_capacity
            if not (math.isclose(self.tau_heat, rc, rel_tol=1e-9) and math.isclose(self.tau_cool, rc, rel_tol=1e-9)):
                raise ValueError(
                    f"single-tau model requires tau_heat = tau_cool = R_thermal*C = {rc:.6g} s "
                    f"(got {self.tau_heat:.6g}, {self.tau_cool:.6g})"
                )

    @classmethod
    def with_single_tau(cls, R_thermal: float, tau: float, geometry: ActuatorGeometry, **kw) -> "ThermalModel":
        return cls(R_thermal, tau / R_thermal, tau, tau, geometry, single_tau=True, **kw)

    @classmethod
    def from_envelope(cls, fit, geometry: ActuatorGeometry, tau_cool: float = 0.110, **kw) -> "ThermalModel":
        """Scale length-normalized envelope parameters to a concrete wire.

        ``R_thermal = a / L_T`` and ``C = b * L_T``, so ``tau_heat = a * b``.
        """
        L_T = geometry.wire_length
        R = fit.a / L_T
        C = fit.b * L_T
        kw.setdefault("T_fail", fit.T_fail)
        return cls(R, C, R * C, tau_cool, geometry, **kw)

    @property
    def gauge_per_kelvin(self) -> float:
        """Gauge pressure (Pa) per kelvin of wire temperature rise."""
        return self.ambient.P0 * self.gains.air_gain / self.ambient.T0


def step_response(model: ThermalModel, power: float, t) -> np.ndarray | float:
    """Wire temperature rise after applying ``power`` for time ``t`` from rest."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    out = -(power * model.R_thermal) * np.expm1(-t / model.tau_heat)
    return float(out) if out.ndim == 0 else out


def steady_state_rise(model: ThermalModel, power: float) -> float:
    return power * model.R_thermal


def power_to_reach(model: ThermalModel, rise: float, t_p: float) -> float:
    """Power whose single pulse of length ``t_p`` ends exactly at ``rise``."""
    return rise / (-model.R_thermal * math.expm1(-t_p / model.tau_heat))


@dataclass(frozen=True)
class PulseSchedule:
    """Time-sorted, non-overlapping ``(start, duration, power)`` segments."""

    starts: np.ndarray
    durations: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.starts, dtype=float).ravel()
        d = np.asarray(self.durations, dtype=float).ravel()
        p = np.asarray(self.powers, dtype=float).ravel()
        if not (s.shape == d.shape == p.shape):
            raise ValueError("starts, durations and powers must have equal length")
        if np.any(d <= 0):
            raise ValueError("pulse durations must be strictly positive")
        if np.any(p < 0):
            raise ValueError("pulse powers must be non-negative")
        if np.any(s < 0):
            raise ValueError("pulse starts must be non-negative")
        if s.size > 1 and np.any(s[1:] < s[:-1] + d[:-1]):
            k = int(np.argmax(s[1:] < s[:-1] + d[:-1]))
            raise ValueError(f"pulses {k} and {k + 1} overlap or are out of order")
        for name, arr in (("starts", s), ("durations", d), ("powers", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_pulses(cls, pulses) -> "PulseSchedule":
        pulses = list(pulses)
        if not pulses:
            return cls.empty()
        s, d, p = zip(*pulses)
        return cls(np.array(s), np.array(d), np.array(p))

    @classmethod
    def empty(cls) -> "PulseSchedule":
        return cls(np.empty(0), np.empty(0), np.empty(0))

    @classmethod
    def single(cls, power: float, t_p: float, start: float = 0.0) -> "PulseSchedule":
        return cls(np.array([start]), np.array([t_p]), np.array([power]))

    @classmethod
    def periodic(cls, power: float, rate: float, duty: float, n_pulses: int, start: float = 0.0) -> "PulseSchedule":
        if not 0 < duty < 1:
            raise ValueError("duty must lie in (0, 1)")
        period = 1.0 / rate
        starts = start + period * np.arange(n_pulses)
        return cls(starts, np.full(n_pulses, duty * period), np.full(n_pulses, float(power)))

    def __len__(self):
        return self.starts.size

    @property
    def end(self) -> float:
        return float(self.starts[-1] + self.durations[-1]) if len(self) else 0.0


@dataclass(frozen=True)
class SimTrace:
    """Uniformly sampled simulation output, starting at ``t0``.

    ``wire_rise`` is K over ambient, ``air_temp`` absolute K, ``pressure``
    gauge Pa, ``force`` N, ``displacement`` mm.
    """

    sample_period: float
    wire_rise: np.ndarray
    air_temp: np.ndarray
    pressure: np.ndarray
    force: np.ndarray
    displacement: np.ndarray
    t0: float = 0.0
    ambient: AmbientState = field(default_factory=AmbientState)

    CHANNELS = ("wire_rise", "air_temp", "pressure", "force", "displacement")

    def __post_init__(self):
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        n = {getattr(self, c).shape for c in self.CHANNELS}
        if len(n) != 1:
            raise ValueError("all channels must have the same length")

    def __len__(self):
        return self.wire_rise.size

    @property
    def time(self) -> np.ndarray:
        return self.t0 + self.sample_period * np.arange(len(self))

    @property
    def wire_temp_celsius(self) -> np.ndarray:
        return self.wire_rise + (self.ambient.T0 - 273.15)

    def channel(self, name: str) -> np.ndarray:
        if name not in self.CHANNELS:
            raise KeyError(f"unknown channel {name!r}; choose from {self.CHANNELS}")
        return getattr(self, name)


def _breakpoints(model: ThermalModel, schedule: PulseSchedule, T_initial: float):
    """Segment starts, end-of-segment targets, time constants and entry states."""
    n = len(schedule)
    edges = np.empty(2 * n + 1)
    edges[0] = 0.0
    edges[1::2] = schedule.starts
    edges[2::2] = schedule.starts + schedule.durations
    target = np.zeros(2 * n + 1)
    target[1::2] = schedule.powers * model.R_thermal
    tau = np.full(2 * n + 1, model.tau_cool)
    tau[1::2] = model.tau_heat

    state = np.empty(2 * n + 1)
    T = float(T_initial)
    state[0] = T
    dt = np.diff(edges)
    decay = np.exp(-dt / tau[:-1])
    grow = -np.expm1(-dt / tau[:-1])
    for k in range(2 * n):
        T = T * decay[k] + target[k] * grow[k]
        state[k + 1] = T
    return edges, target, tau, state


def wire_rise_at(model: ThermalModel, schedule: PulseSchedule, t, T_initial: float = 0.0) -> np.ndarray:
    """Exact wire temperature rise at arbitrary times ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    edges, target, tau, state = _breakpoints(model, schedule, T_initial)
    k = np.searchsorted(edges, t, side="right") - 1
    x = -(t - edges[k]) / tau[k]
    return state[k] * np.exp(x) - target[k] * np.expm1(x)


def chain_from_wire_rise(model: ThermalModel, wire_rise: np.ndarray, sample_period: float, t0: float = 0.0) -> SimTrace:
    amb = model.ambient
    air = amb.T0 + model.gains.air_gain * wire_rise
    # gauge pressure computed from the rise directly; P0*(T/T0 - 1) cancels badly near ambient
    pressure = model.gauge_per_kelvin * wire_rise
    force = pressure * model.geometry.pixel_area
    disp = model.gains.compliance * force / mm
    return SimTrace(sample_period, wire_rise, air, pressure, force, disp, t0=t0, ambient=amb)


def simulate(
    model: ThermalModel,
    schedule: PulseSchedule,
    t_end: float,
    sample_period: float,
    T_initial: float = 0.0,
) -> SimTrace:
    """Simulate ``schedule`` on ``[0, t_end]`` sampled every ``sample_period``.

    ``T_initial`` is the wire temperature rise at ``t = 0``.
    """
    if not sample_period > 0:
        raise ValueError("sample_period must be positive")
    if t_end < schedule.end:
        raise ValueError(f"t_end={t_end} s does not cover the schedule (ends at {schedule.end} s)")
    n = int(math.floor(t_end / sample_period + 1e-9)) + 1
    t = sample_period * np.arange(n)
    # snap samples that land on a pulse edge up to rounding onto the edge itself
    edges = np.concatenate([schedule.starts, schedule.starts + schedule.durations])
    if edges.size:
        k = np.rint(edges / sample_period).astype(np.int64)
        on_grid = (k >= 0) & (k < n) & (np.abs(k * sample_period - edges) <= 1e-9 * sample_period)
        t[k[on_grid]] = edges[on_grid]
    rise = wire_rise_at(model, schedule, t, T_initial)
    return chain_from_wire_rise(model, rise, sample_period)


def peak_force(model: ThermalModel, power: float, t_p: float) -> float:
    """Blocked-force maximum of a single pulse from rest, reached at pulse end."""
    rise = step_response(model, power, t_p)
    return float((model.gauge_per_kelvin * rise) * model.geometry.pixel_area)


def periodic_initial_rise(model: ThermalModel, power: float, rate: float, duty: float) -> float:
    """Wire rise at pulse onset on the limit cycle of a periodic train.

    Starting a simulation from this state skips the warm-up transient, so
    every period is identical.
    """
    period = 1.0 / rate
    t_on = duty * period
    t_off = period - t_on
    d_on = math.exp(-t_on / model.tau_heat)
    d_off = math.exp(-t_off / model.tau_cool)
    peak_gain = -power * model.R_thermal * math.expm1(-t_on / model.tau_heat)
    return peak_gain * d_off / (1.0 - d_on * d_off)


def air_rise_from_force(force: float, model: ThermalModel) -> float:
    return air_temp_from_force(force, model.geometry, model.ambient) - model.ambient.T0


def reference_model(geometry: ActuatorGeometry | None = None) -> ThermalModel:
    """Single-tau model calibrated to the L = 8 mm, D = 6 mm single-pulse point.

    A 4.8 W, 75 ms pulse produces a 1070 K wire rise (1090 C at 20 C),
    750 mN blocked force and 0.96 mm free displacement; cooling tau 110 ms.
    """
    from .calibration import calibrate_gains

    geom = geometry or ActuatorGeometry.from_mm(8, 6)
    ambient = AmbientState()
    tau = 0.110
    rise = 1090.0 - (ambient.T0 - 273.15)
    R = rise / (-4.8 * math.expm1(-0.075 / tau))
    gains = calibrate_gains(ambient.T0 + rise, None, 0.750, 0.96 * mm, geom, ambient)
    return ThermalModel.with_single_tau(R, tau, geom, ambient=ambient, gains=gains)
