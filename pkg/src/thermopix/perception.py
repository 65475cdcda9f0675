"""Reduction of magnitude-estimation ratings and localization trial logs.

Magnitude ratings are normalized per participant by the geometric mean of
that participant's positive ratings, then pooled: every normalized rating at a
power level enters one arithmetic mean. Zero ratings ("no sensation") are left
out of the geometric mean but kept as zeros in the pooled mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .calibration import linear_fit
from .envelope import EnvelopeFit, is_safe, max_pulse_duration
from .physics import ActuatorGeometry


class PerceptionError(ValueError):
    pass


@dataclass(frozen=True)
class MagnitudeDataset:
    participants: np.ndarray
    powers: np.ndarray
    ratings: np.ndarray

    def __post_init__(self):
        part = np.asarray(self.participants).ravel()
        pw = np.asarray(self.powers, dtype=float).ravel()
        rt = np.asarray(self.ratings, dtype=float).ravel()
        if not (part.size == pw.size == rt.size) or part.size == 0:
            raise PerceptionError("dataset needs equal-length, non-empty participant/power/rating columns")
        if np.any(rt < 0) or not np.all(np.isfinite(rt)):
            raise PerceptionError("ratings must be finite and non-negative")
        levels = None
        for p in np.unique(part):
            mine = part == p
            if not np.any(rt[mine] > 0):
                raise PerceptionError(f"participant {p!r} has no positive rating; geometric mean undefined")
            lv = set(np.unique(pw[mine]).tolist())
            if levels is None:
                levels = lv
            elif lv != levels:
                raise PerceptionError(f"participant {p!r} was tested at different power levels")
        object.__setattr__(self, "participants", part)
        object.__setattr__(self, "powers", pw)
        object.__setattr__(self, "ratings", rt)

    @classmethod
    def from_rows(cls, rows) -> "MagnitudeDataset":
        rows = list(rows)
        if not rows:
            raise PerceptionError("empty magnitude dataset")
        p, w, r = zip(*rows)
        return cls(np.array(p), np.array(w), np.array(r))

    @classmethod
    def from_csv(cls, path) -> "MagnitudeDataset":
        with open(path, newline="") as fh:
            reader = csv.DictReader(ln for ln in fh if not ln.lstrip().startswith("#"))
            if reader.fieldnames is None or set(reader.fieldnames) != {"participant", "power_W", "rating"}:
                raise PerceptionError("magnitude CSV header must be 'participant,power_W,rating'")
            rows = [(r["participant"], float(r["power_W"]), float(r["rating"])) for r in reader]
        return cls.from_rows(rows)


@dataclass(frozen=True)
class ReducedIntensity:
    powers: np.ndarray
    intensities: np.ndarray
    n_ratings: np.ndarray
    averaging: str = "normalize per participant, then one pooled arithmetic mean per power level"


def reduce_magnitude(dataset: MagnitudeDataset, restore_scale: bool = False) -> ReducedIntensity:
    """Per-power perceived intensity from raw ratings.

    With ``restore_scale`` the normalized values are multiplied by the
    geometric mean of all positive ratings, which keeps the panel's overall
    numeric scale instead of centering every participant on 1.
    """
    part, pw, rt = dataset.participants, dataset.powers, dataset.ratings
    norm = np.empty_like(rt)
    for p in np.unique(part):
        mine = part == p
        r = rt[mine]
        gm = math.exp(np.mean(np.log(r[r > 0])))
        norm[mine] = r / gm
    if restore_scale:
        norm = norm * math.exp(np.mean(np.log(rt[rt > 0])))
    levels = np.unique(pw)
    means = np.array([norm[pw == lv].mean() for lv in levels])
    counts = np.array([np.count_nonzero(pw == lv) for lv in levels])
    return ReducedIntensity(levels, means, counts)


@dataclass(frozen=True)
class IntensityModel:
    slope: float
    intercept: float
    r2: float = 1.0

    @classmethod
    def published(cls) -> "IntensityModel":
        return cls(0.2677, -0.151, 0.97)

    def intensity(self, power):
        return self.slope * np.asarray(power, dtype=float) + self.intercept


def intensity_for_power(model: IntensityModel, power: float) -> float:
    return float(model.slope * power + model.intercept)


def fit_intensity_model(reduced: ReducedIntensity) -> IntensityModel:
    fit = linear_fit(reduced.powers, reduced.intensities, space="linear")
    return IntensityModel(fit.slope, fit.intercept, fit.r2)


@dataclass(frozen=True)
class DriveCheck:
    power: float
    safe: bool | None
    max_safe_power: float | None = None
    max_safe_t_p: float | None = None


def power_for_intensity(
    model: IntensityModel,
    target: float,
    geometry: ActuatorGeometry | None = None,
    t_p: float | None = None,
    fit: EnvelopeFit | None = None,
    margin: float = 0.10,
) -> DriveCheck:
    """Invert the intensity line; optionally check the result against the envelope.

    The envelope check runs when ``geometry``, ``t_p`` and ``fit`` are all given.
    """
    if not model.slope > 0:
        raise PerceptionError("intensity model needs a positive slope to be inverted")
    power = (target - model.intercept) / model.slope
    if not power > 0:
        raise PerceptionError(f"intensity {target} requires non-positive power {power:.4g} W")
    if geometry is None or t_p is None or fit is None:
        return DriveCheck(power, None)
    rho = power / geometry.wire_length
    report = is_safe(fit, rho, t_p, margin)
    max_power = (1 - margin) * report.boundary * geometry.wire_length
    return DriveCheck(power, report.safe, max_power, max_pulse_duration(fit, rho / (1 - margin)))


@dataclass(frozen=True)
class LocalizationStats:
    accuracy: float
    confusion: np.ndarray
    per_participant: dict
    n_trials: int


def localization_stats(trials, n_sites: int = 4) -> LocalizationStats:
    """Accuracy and confusion matrix (rows presented, columns reported; sites 1-based)."""
    trials = list(trials)
    if not trials:
        raise PerceptionError("localization log is empty")
    conf = np.zeros((n_sites, n_sites), dtype=np.int64)
    hits: dict = {}
    for i, (participant, presented, reported) in enumerate(trials):
        presented, reported = int(presented), int(reported)
        if not (1 <= presented <= n_sites and 1 <= reported <= n_sites):
            raise PerceptionError(f"trial {i}: site out of range 1..{n_sites} ({presented}, {reported})")
        conf[presented - 1, reported - 1] += 1
        c, n = hits.get(participant, (0, 0))
        hits[participant] = (c + (presented == reported), n + 1)
    total = int(conf.sum())
    return LocalizationStats(
        accuracy=float(np.trace(conf)) / total,
        confusion=conf,
        per_participant={p: c / n for p, (c, n) in sorted(hits.items(), key=lambda kv: str(kv[0]))},
        n_trials=total,
    )


def read_localization_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(ln for ln in fh if not ln.lstrip().startswith("#"))
        if reader.fieldnames is None or set(reader.fieldnames) != {"participant", "presented", "reported"}:
            raise PerceptionError("localization CSV header must be 'participant,presented,reported'")
        return [(r["participant"], int(r["presented"]), int(r["reported"])) for r in reader]
