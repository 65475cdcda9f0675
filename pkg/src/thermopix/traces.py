"""Sampled time series: the Trace container, CSV I/O and cyclic/spectral/peak reductions.

CSV layout::

    # geometry=L8D6
    # power_W=4.8
    time_s,force_N
    0.000000000,0.0
    0.001000000,0.0123
    ...

Sampling must be uniform; a trace is rejected on load if any step deviates
from the median step by more than ``1e-6`` of it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

# Scale and offset into the canonical unit (first entry of each kind).
UNITS: dict[str, dict[str, tuple[float, float]]] = {
    "force": {"N": (1.0, 0.0), "mN": (1e-3, 0.0)},
    "displacement": {"mm": (1.0, 0.0), "m": (1e3, 0.0), "um": (1e-3, 0.0)},
    "shunt_voltage": {"V": (1.0, 0.0), "mV": (1e-3, 0.0)},
    "temperature": {"C": (1.0, 0.0), "K": (1.0, -273.15)},
    "resistance": {"ohm": (1.0, 0.0)},
}

JITTER_TOLERANCE = 1e-6


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class Trace:
    kind: str
    unit: str
    sample_period: float
    samples: np.ndarray
    t0: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in UNITS:
            raise TraceError(f"unknown quantity kind {self.kind!r}; expected one of {sorted(UNITS)}")
        if self.unit not in UNITS[self.kind]:
            raise TraceError(f"unit {self.unit!r} is not valid for {self.kind}; expected one of {sorted(UNITS[self.kind])}")
        if not self.sample_period > 0:
            raise TraceError("sample_period must be positive")
        arr = np.asarray(self.samples, dtype=float).ravel()
        if arr.size < 1:
            raise TraceError("a trace needs at least one sample")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def time(self) -> np.ndarray:
        return self.t0 + self.sample_period * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.sample_period * len(self)

    @property
    def column(self) -> str:
        return f"{self.kind}_{self.unit}"

    def to(self, unit: str) -> "Trace":
        """Same trace expressed in another unit of the same kind."""
        table = UNITS[self.kind]
        if unit not in table:
            raise TraceError(f"cannot express {self.kind} in {unit!r}")
        s0, o0 = table[self.unit]
        s1, o1 = table[unit]
        values = ((self.samples * s0 + o0) - o1) / s1
        return Trace(self.kind, unit, self.sample_period, values, self.t0, dict(self.metadata))

    def require(self, kind: str, unit: str | None = None) -> "Trace":
        if self.kind != kind:
            raise TraceError(f"expected a {kind} trace, got {self.kind}")
        return self if unit is None or unit == self.unit else self.to(unit)

    def window(self, start: float, stop: float) -> "Trace":
        """Samples with ``start <= t < stop`` (times absolute, like :attr:`time`)."""
        i0 = max(0, int(math.ceil((start - self.t0) / self.sample_period - 1e-9)))
        i1 = min(len(self), int(math.ceil((stop - self.t0) / self.sample_period - 1e-9)))
        if i1 <= i0:
            raise TraceError(f"window [{start}, {stop}) holds no samples")
        return Trace(self.kind, self.unit, self.sample_period, self.samples[i0:i1], self.t0 + i0 * self.sample_period, dict(self.metadata))


def sim_channel(sim, channel: str, **metadata) -> Trace:
    """Wrap one channel of a :class:`~thermopix.thermal.SimTrace` as a Trace."""
    kinds = {
        "force": ("force", "N"),
        "displacement": ("displacement", "mm"),
        "air_temp": ("temperature", "K"),
        "wire_rise": ("temperature", "K"),
    }
    if channel not in kinds:
        raise TraceError(f"channel {channel!r} has no trace kind")
    kind, unit = kinds[channel]
    values = sim.channel(channel)
    if channel == "wire_rise":
        values = values + sim.ambient.T0
    return Trace(kind, unit, sim.sample_period, values, sim.t0, dict(metadata))


# -- CSV ------------------------------------------------------------------


def _format_meta(value) -> str:
    return str(value).replace("\n", " ")


def write_csv(trace: Trace, path=None) -> str:
    buf = io.StringIO()
    for key in sorted(trace.metadata):
        buf.write(f"# {key}={_format_meta(trace.metadata[key])}\n")
    buf.write(f"time_s,{trace.column}\n")
    for t, v in zip(trace.time, trace.samples):
        buf.write(f"{t:.9f},{float(v)!r}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_sim_csv(sim, path=None) -> str:
    """Multi-column export of a SimTrace; load columns back with :func:`read_csv`."""
    buf = io.StringIO()
    buf.write("time_s,wire_rise_K,air_temp_K,pressure_Pa,force_N,displacement_mm\n")
    for row in zip(sim.time, sim.wire_rise, sim.air_temp, sim.pressure, sim.force, sim.displacement):
        buf.write(f"{row[0]:.9f}," + ",".join(repr(float(x)) for x in row[1:]) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


_COLUMN_KINDS = {
    "wire_rise_K": ("temperature", "K"),
    "air_temp_K": ("temperature", "K"),
}


def _parse_column(name: str) -> tuple[str, str]:
    if name in _COLUMN_KINDS:
        return _COLUMN_KINDS[name]
    kind, _, unit = name.rpartition("_")
    if kind not in UNITS or unit not in UNITS[kind]:
        raise TraceError(f"column {name!r} is not of the form <quantity>_<unit> with a known quantity and unit")
    return kind, unit


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def read_csv(source, column: str | None = None) -> Trace:
    """Load a trace from a path or CSV text.

    ``column`` picks one data column when the file has several; by default the
    first column after ``time_s`` is used.
    """
    text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
    metadata = {}
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition("=")
            if sep:
                metadata[key.strip()] = _coerce(value.strip())
            continue
        body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise TraceError("empty trace file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "time_s":
        raise TraceError(f"first column must be time_s, got {header[0]!r}")
    if len(header) < 2:
        raise TraceError("trace file has no data column")
    name = column or header[1]
    if name not in header:
        raise TraceError(f"column {name!r} not in {header}")
    idx = header.index(name)
    kind, unit = _parse_column(name)
    data = np.array([[float(r[0]), float(r[idx])] for r in rows[1:]])
    if data.shape[0] < 1:
        raise TraceError("trace file has no samples")
    t = data[:, 0]
    if t.size == 1:
        dt = float(metadata.get("sample_period_s", 0) or 0)
        if not dt > 0:
            raise TraceError("single-sample trace needs a sample_period_s metadata line")
    else:
        steps = np.diff(t)
        dt = float(np.median(steps))
        if not dt > 0:
            raise TraceError("time column must be strictly increasing")
        worst = float(np.max(np.abs(steps - dt)))
        # CSV times are printed to 1 ns; allow for that rounding too
        if worst > JITTER_TOLERANCE * dt + 1e-9:
            i = int(np.argmax(np.abs(steps - dt)))
            raise TraceError(f"non-uniform sampling at row {i + 1}: step {steps[i]:.9g} s vs {dt:.9g} s")
        # recover the period from the span, which averages out print rounding
        dt = (t[-1] - t[0]) / (t.size - 1)
    return Trace(kind, unit, dt, data[:, 1], float(t[0]), metadata)


# -- reductions -----------------------------------------------------------


@dataclass(frozen=True)
class CyclicDecomposition:
    offset: float
    peak_to_peak: float
    window: tuple[float, float]
    periods: int


def decompose_cyclic(trace: Trace, rate: float, settle_periods: int = 5) -> CyclicDecomposition:
    """Split a periodically driven response into offset and pulse-synchronous parts.

    Periods are aligned to ``t0``. After discarding ``settle_periods``, the
    offset is the mean of the remaining whole periods and the peak-to-peak value
    is the mean over those periods of (max - min).
    """
    if not rate > 0:
        raise TraceError("drive rate must be positive")
    spp = 1.0 / (rate * trace.sample_period)
    if spp < 20 - 1e-9:
        raise TraceError(f"sample rate {1 / trace.sample_period:g} Hz below the required {20 * rate:g} Hz (20x drive rate)")
    n_periods = int(math.floor(len(trace) / spp + 1e-9))
    need = settle_periods + 3
    if n_periods < need:
        raise TraceError(f"trace spans {n_periods} whole periods at {rate:g} Hz; need at least {need}")
    k = np.arange(len(trace))
    # period index of each sample; tiny offset keeps exact boundaries in the later period
    period_of = np.floor(k / spp + 1e-9).astype(np.int64)
    mask = (period_of >= settle_periods) & (period_of < n_periods)
    y = trace.samples[mask]
    p = period_of[mask] - settle_periods
    starts = np.flatnonzero(np.r_[True, p[1:] != p[:-1]])
    hi = np.maximum.reduceat(y, starts)
    lo = np.minimum.reduceat(y, starts)
    t0 = trace.t0 + settle_periods / rate
    return CyclicDecomposition(
        offset=float(np.mean(y)),
        peak_to_peak=float(np.mean(hi - lo)),
        window=(t0, trace.t0 + n_periods / rate),
        periods=n_periods - settle_periods,
    )


def highpass(x: np.ndarray, cutoff: float, sample_period: float) -> np.ndarray:
    """Single-pole high-pass applied forward and backward (zero phase)."""
    b, a = signal.butter(1, cutoff, btype="highpass", fs=1.0 / sample_period)
    return signal.filtfilt(b, a, x)


def magnitude_spectrum(trace: Trace, highpass_cutoff: float | None = None, detrend: bool = True):
    """One-sided magnitude spectrum normalized so ``sum(mag**2) == sum(x**2)``.

    The signal is linearly detrended and, when ``highpass_cutoff`` is given,
    high-pass filtered before the transform. Bin spacing is ``1 / (N dt)``.
    """
    n = len(trace)
    if n < 64:
        raise TraceError(f"spectrum needs at least 64 samples, got {n}")
    x = trace.samples.astype(float)
    if detrend:
        x = signal.detrend(x, type="linear")
    if highpass_cutoff is not None:
        x = highpass(x, highpass_cutoff, trace.sample_period)
    X = np.fft.rfft(x)
    weight = np.full(X.size, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    mags = np.abs(X) * np.sqrt(weight / n)
    freqs = np.fft.rfftfreq(n, d=trace.sample_period)
    return freqs, mags


def detect_peaks(
    trace: Trace, prominence: float | None = None, rel_prominence: float = 0.1, window: float | None = None
) -> np.ndarray:
    """Indices of local maxima; default prominence is ``rel_prominence`` of the settled range.

    The settled range is max - min over the second half of the trace.
    ``window`` (s) bounds the search for each peak's prominence base; a couple
    of drive periods is enough for pulse trains and keeps long runs fast.
    """
    x = trace.samples
    if prominence is None:
        tail = x[len(x) // 2 :]
        prominence = rel_prominence * float(np.ptp(tail))
        if prominence <= 0:
            prominence = rel_prominence * float(np.ptp(x))
    if prominence <= 0:
        return np.empty(0, dtype=np.int64)
    wlen = None if window is None else max(3, int(round(window / trace.sample_period)) | 1)
    idx, _ = signal.find_peaks(x, prominence=prominence, wlen=wlen)
    return idx


def peak_stats(
    trace: Trace, group_size: int, prominence: float | None = None, window: float | None = None
) -> list[tuple[int, float]]:
    """Mean peak value of consecutive groups of ``group_size`` detected peaks.

    A trailing partial group is dropped.
    """
    if group_size < 1:
        raise TraceError("group_size must be at least 1")
    idx = detect_peaks(trace, prominence, window=window)
    if idx.size == 0:
        raise TraceError("no peaks detected")
    n_groups = idx.size // group_size
    if n_groups == 0:
        raise TraceError(f"only {idx.size} peaks detected, fewer than one group of {group_size}")
    values = trace.samples[idx[: n_groups * group_size]].reshape(n_groups, group_size)
    return [(g, float(m)) for g, m in enumerate(values.mean(axis=1))]


def surface_temp_stats(trace: Trace, window: float | tuple[float, float] | None = None) -> float:
    """Maximum temperature rise over the window, relative to its first sample (K).

    ``window`` is either a length in seconds from the trace start or an
    explicit ``(start, stop)`` pair.
    """
    trace = trace.require("temperature")
    if window is not None:
        if isinstance(window, tuple):
            start, stop = window
        else:
            start, stop = trace.t0, trace.t0 + window
        if start < trace.t0 - 1e-12 or stop > trace.t0 + trace.duration + 1e-12:
            raise TraceError("window extends beyond the trace")
        trace = trace.window(start, stop)
    x = trace.samples
    return float(np.max(x) - x[0])
