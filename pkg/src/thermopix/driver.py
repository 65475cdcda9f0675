"""Virtual multi-module driver board: pattern compilation into gate events.

Each pixel sits behind a low-side switch whose gate is pulled down, so every
channel starts off. Time is kept in integer microseconds; seconds appear only
at the file and simulation boundaries.

Channel numbering is global: ``module_id * 4 + local_index``. A single-pixel
module only exposes its local channel 0.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .envelope import DEFAULT_MARGIN, EnvelopeFit, is_safe
from .physics import ActuatorGeometry
from .thermal import PulseSchedule, SimTrace, simulate

MAX_MODULES = 10
CHANNELS_PER_SLOT = 4
MAX_CHANNELS = MAX_MODULES * CHANNELS_PER_SLOT
PULSE_RANGE_US = (500, 100_000)
US_PER_S = 1_000_000


class ScheduleError(ValueError):
    pass


class UnsafeCommandError(ScheduleError):
    def __init__(self, channel: int, report, command_index: int):
        self.channel = channel
        self.report = report
        self.command_index = command_index
        deficit = 1.0 - report.headroom
        super().__init__(
            f"command {command_index} unsafe on channel {channel}: rho {report.rho / 1e3:.4g} W/mm at "
            f"t_p {report.t_p * 1e3:.3g} ms exceeds the {report.margin:.0%}-margin limit by {deficit:.1%}; "
            f"max safe t_p at this power is {_ms(report.max_t_p)} ({_ms(report.boundary_t_p)} at the failure boundary)"
        )


def _ms(t: float) -> str:
    return "unbounded" if math.isinf(t) else f"{t * 1e3:.1f} ms"


def _exact(x) -> Fraction:
    # decimal string round-trip keeps user-entered values like 0.2 exact
    return Fraction(repr(float(x))) if not isinstance(x, (int, Fraction)) else Fraction(x)


@dataclass(frozen=True)
class ModuleConfig:
    module_id: int
    kind: str
    geometries: tuple
    wire_resistances: tuple
    pins: tuple = ()

    def __post_init__(self):
        if not 0 <= self.module_id < MAX_MODULES:
            raise ScheduleError(f"module id must be 0..{MAX_MODULES - 1}, got {self.module_id}")
        n = {"single": 1, "quartet": 4}.get(self.kind)
        if n is None:
            raise ScheduleError(f"module kind must be 'single' or 'quartet', got {self.kind!r}")
        if len(self.geometries) != n or len(self.wire_resistances) != n:
            raise ScheduleError(f"{self.kind} module needs {n} geometries and wire resistances")
        if any(not r > 0 for r in self.wire_resistances):
            raise ScheduleError("wire resistances must be positive")
        pins = self.pins or tuple(range(n))
        if len(pins) != n or len(set(pins)) != n:
            raise ScheduleError("pin map must assign a distinct pin to each channel")
        object.__setattr__(self, "pins", tuple(pins))

    @classmethod
    def uniform(cls, module_id: int, kind: str, geometry: ActuatorGeometry, wire_resistance: float) -> "ModuleConfig":
        n = 1 if kind == "single" else 4
        return cls(module_id, kind, (geometry,) * n, (wire_resistance,) * n)

    @property
    def channels(self) -> tuple[int, ...]:
        base = self.module_id * CHANNELS_PER_SLOT
        return tuple(base + i for i in range(len(self.geometries)))


@dataclass(frozen=True)
class PatternCommand:
    channels: tuple
    rate: float
    duty: float
    duration: float
    start: float = 0.0
    power: float | None = None
    voltage: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if not self.channels:
            raise ScheduleError("command addresses no channels")
        if len(set(self.channels)) != len(self.channels):
            raise ScheduleError("command lists a channel twice")
        if not 0 < self.duty < 1:
            raise ScheduleError(f"duty must lie in (0, 1), got {self.duty}")
        if not self.rate > 0:
            raise ScheduleError("pulse rate must be positive")
        if self.duration < 0 or self.start < 0:
            raise ScheduleError("start and duration must be non-negative")
        if (self.power is None) == (self.voltage is None):
            raise ScheduleError("give exactly one of power or voltage")
        if self.power is not None and self.power < 0:
            raise ScheduleError("power must be non-negative")

    def timing_us(self) -> tuple[int, Fraction, int, int]:
        """``(start_us, period_us, t_p_us, pulse_count)``; the period stays rational."""
        period = Fraction(US_PER_S) / _exact(self.rate)
        t_p = round(_exact(self.duty) * period)
        count = math.floor(_exact(self.duration) * _exact(self.rate))
        start = round(_exact(self.start) * US_PER_S)
        return start, period, t_p, count

    def power_on(self, resistance: float) -> float:
        return float(self.power) if self.power is not None else self.voltage**2 / resistance


@dataclass(frozen=True)
class GateEvent:
    time_us: int
    channel: int
    on: bool
    power: float


@dataclass(frozen=True)
class GateEventLog:
    events: tuple
    pulses: dict  # channel -> tuple of (start_us, duration_us, power_W)
    energy: dict  # channel -> J
    on_time_us: dict  # channel -> total on-time
    pulse_count: dict

    @property
    def channels(self) -> list[int]:
        return sorted(self.pulses)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("time_us,channel,state\n")
        for e in self.events:
            buf.write(f"{e.time_us},{e.channel},{int(e.on)}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def schedule(self, channel: int) -> PulseSchedule:
        p = self.pulses[channel]
        return PulseSchedule.from_pulses((s / US_PER_S, d / US_PER_S, w) for s, d, w in p)

    @property
    def end_us(self) -> int:
        return self.events[-1].time_us if self.events else 0


def _channel_table(modules) -> dict:
    modules = list(modules)
    if len(modules) > MAX_MODULES:
        raise ScheduleError(f"at most {MAX_MODULES} modules, got {len(modules)}")
    ids = [m.module_id for m in modules]
    if len(set(ids)) != len(ids):
        raise ScheduleError("duplicate module id")
    table = {}
    for m in modules:
        for ch, geom, res in zip(m.channels, m.geometries, m.wire_resistances):
            table[ch] = (geom, res, m.module_id)
    if len(table) > MAX_CHANNELS:
        raise ScheduleError(f"at most {MAX_CHANNELS} channels")
    return table


def compile_pattern(commands, modules, fit: EnvelopeFit, margin: float = DEFAULT_MARGIN) -> GateEventLog:
    """Expand pattern commands into a time-ordered gate event log.

    Each command emits ``floor(duration * rate)`` pulses per channel; a trailing
    partial period emits nothing. Every pulse is checked against the envelope
    with ``margin`` before anything is emitted.
    """
    table = _channel_table(modules)
    per_channel: dict[int, list] = {}
    spans: dict[int, list] = {}
    energy: dict[int, float] = {}
    on_time: dict[int, int] = {}
    counts: dict[int, int] = {}

    for ci, cmd in enumerate(commands):
        start, period, t_p, count = cmd.timing_us()
        if not PULSE_RANGE_US[0] <= t_p <= PULSE_RANGE_US[1]:
            raise ScheduleError(
                f"command {ci}: pulse width {t_p} us outside the supported {PULSE_RANGE_US[0]}-{PULSE_RANGE_US[1]} us"
            )
        onsets = [start + round(k * period) for k in range(count)]
        if count > 1 and min(b - a for a, b in zip(onsets, onsets[1:])) <= t_p:
            raise ScheduleError(f"command {ci}: pulses would merge at {t_p} us width and {float(period):.1f} us period")
        for ch in cmd.channels:
            if ch not in table:
                raise ScheduleError(f"command {ci}: unknown channel {ch}")
            geom, res, _ = table[ch]
            power = cmd.power_on(res)
            if count and power > 0:
                report = is_safe(fit, power / geom.wire_length, t_p / US_PER_S, margin)
                if not report.safe:
                    raise UnsafeCommandError(ch, report, ci)
            if count == 0:
                continue
            span = (onsets[0], onsets[-1] + t_p, ci)
            for other in spans.get(ch, []):
                if span[0] <= other[1] and other[0] <= span[1]:
                    raise ScheduleError(f"commands {other[2]} and {ci} overlap on channel {ch}")
            spans.setdefault(ch, []).append(span)
            per_channel.setdefault(ch, []).extend((s, t_p, power) for s in onsets)
            energy[ch] = energy.get(ch, 0.0) + power * (t_p * count) / US_PER_S
            on_time[ch] = on_time.get(ch, 0) + t_p * count
            counts[ch] = counts.get(ch, 0) + count

    events = []
    pulses = {}
    for ch in sorted(per_channel):
        plist = tuple(sorted(per_channel[ch]))
        pulses[ch] = plist
        for s, d, w in plist:
            events.append(GateEvent(s, ch, True, w))
            events.append(GateEvent(s + d, ch, False, w))
    events.sort(key=lambda e: (e.time_us, e.channel))
    return GateEventLog(tuple(events), pulses, dict(sorted(energy.items())), dict(sorted(on_time.items())), dict(sorted(counts.items())))


def verify_log(log: GateEventLog, modules, fit: EnvelopeFit, margin: float = DEFAULT_MARGIN) -> list[str]:
    """Re-derive pulses from the raw event stream and re-check every one.

    Returns a list of problems; empty means the log is well formed and safe.
    """
    table = _channel_table(modules)
    problems = []
    state: dict[int, tuple] = {}
    last = None
    for i, e in enumerate(log.events):
        key = (e.time_us, e.channel)
        if last is not None and key <= last:
            problems.append(f"event {i} not strictly after its predecessor")
        last = key
        if e.channel not in table:
            problems.append(f"event {i}: unknown channel {e.channel}")
            continue
        if e.on:
            if e.channel in state:
                problems.append(f"event {i}: channel {e.channel} switched on twice")
            state[e.channel] = (e.time_us, e.power)
        else:
            if e.channel not in state:
                problems.append(f"event {i}: channel {e.channel} switched off while off")
                continue
            t_on, power = state.pop(e.channel)
            geom = table[e.channel][0]
            if power > 0 and not is_safe(fit, power / geom.wire_length, (e.time_us - t_on) / US_PER_S, margin).safe:
                problems.append(f"pulse at {t_on} us on channel {e.channel} violates the envelope")
    for ch in state:
        problems.append(f"channel {ch} left on at end of log")
    return problems


def simulate_pattern(
    log: GateEventLog,
    models: dict,
    sample_period: float = 1e-4,
    t_end: float | None = None,
) -> dict[int, SimTrace]:
    """Simulate every channel of the log independently, keyed by channel."""
    missing = [ch for ch in log.channels if ch not in models]
    if missing:
        raise ScheduleError(f"no thermal model for channels {missing}")
    if t_end is None:
        t_end = log.end_us / US_PER_S
    return {ch: simulate(models[ch], log.schedule(ch), t_end, sample_period) for ch in log.channels}


@dataclass(frozen=True)
class BoardReport:
    peak_channels: int
    peak_power: float
    peak_time_us: int
    module_energy: dict
    total_energy: float

    def to_dict(self) -> dict:
        return {
            "peak_simultaneous_channels": self.peak_channels,
            "peak_power_W": self.peak_power,
            "peak_time_us": self.peak_time_us,
            "module_energy_J": {str(k): v for k, v in self.module_energy.items()},
            "total_energy_J": self.total_energy,
        }


def board_report(log: GateEventLog) -> BoardReport:
    """Peak concurrent load and energy per module, computed event by event."""
    active: dict[int, float] = {}
    peak_n, peak_p, peak_t = 0, 0.0, 0
    i = 0
    ev = log.events
    while i < len(ev):
        t = ev[i].time_us
        while i < len(ev) and ev[i].time_us == t:
            if ev[i].on:
                active[ev[i].channel] = ev[i].power
            else:
                active.pop(ev[i].channel, None)
            i += 1
        p = math.fsum(active.values())
        if p > peak_p or (p == peak_p and len(active) > peak_n):
            peak_p, peak_t = p, t
        peak_n = max(peak_n, len(active))
    module_energy: dict[int, float] = {}
    for ch, e in log.energy.items():
        mod = ch // CHANNELS_PER_SLOT
        module_energy[mod] = module_energy.get(mod, 0.0) + e
    return BoardReport(peak_n, peak_p, peak_t, dict(sorted(module_energy.items())), math.fsum(log.energy.values()))


# -- pattern files ----------------------------------------------------------


def load_pattern(source) -> tuple[list[PatternCommand], list[ModuleConfig]]:
    """Parse a pattern document (path or dict); schema in the README."""
    doc = json.loads(Path(source).read_text()) if not isinstance(source, dict) else source
    modules = []
    for m in doc.get("modules", []):
        kind = m.get("kind", "single")
        n = 1 if kind == "single" else 4
        chans = m.get("channels")
        if chans:
            geoms = tuple(ActuatorGeometry.from_label(c.get("geometry", m.get("geometry"))) for c in chans)
            res = tuple(float(c.get("wire_resistance_ohm", m.get("wire_resistance_ohm"))) for c in chans)
            pins = tuple(int(c["pin"]) for c in chans) if all("pin" in c for c in chans) else ()
        else:
            geoms = (ActuatorGeometry.from_label(m["geometry"]),) * n
            res = (float(m["wire_resistance_ohm"]),) * n
            pins = ()
        modules.append(ModuleConfig(int(m["id"]), kind, geoms, res, pins))
    commands = []
    for c in doc.get("commands", []):
        commands.append(
            PatternCommand(
                channels=tuple(c["channels"]),
                rate=float(c["rate_Hz"]),
                duty=float(c["duty"]),
                duration=float(c["duration_s"]),
                start=float(c.get("start_s", 0.0)),
                power=None if c.get("power_W") is None else float(c["power_W"]),
                voltage=None if c.get("voltage_V") is None else float(c["voltage_V"]),
            )
        )
    return commands, modules
