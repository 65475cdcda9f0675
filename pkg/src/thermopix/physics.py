"""Algebraic relations between drive, geometry, gas state, force and displacement.

All quantities are SI. Gauge pressure is ``F / A``; every ideal-gas expression
works on absolute pressure ``P0 + F / A``.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

from .units import mm, mm_per_N

# Wire routing adds this much beyond the two passes along the cavity.
WIRE_ROUTING_EXTRA = 1.0 * mm

DEMONSTRATED_LENGTH_RANGE = (2 * mm, 10 * mm)
DEMONSTRATED_WIDTH = 2 * mm


class GeometryRangeWarning(UserWarning):
    """Geometry lies outside the regime the actuator was characterized in."""


@dataclass(frozen=True)
class ActuatorGeometry:
    """Cavity and aperture dimensions of a single pixel, in meters.

    ``cavity_depth`` is optional and only feeds :attr:`cavity_volume`.
    """

    cavity_length: float
    aperture_diameter: float
    cavity_width: float = DEMONSTRATED_WIDTH
    cavity_depth: float | None = None

    def __post_init__(self):
        for name in ("cavity_length", "aperture_diameter", "cavity_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        if self.cavity_depth is not None and not self.cavity_depth > 0:
            raise ValueError("cavity_depth must be strictly positive when given")
        lo, hi = DEMONSTRATED_LENGTH_RANGE
        tol = 1e-12
        if not (lo - tol <= self.cavity_length <= hi + tol):
            warnings.warn(
                f"cavity length {self.cavity_length / mm:g} mm outside the demonstrated 2-10 mm range",
                GeometryRangeWarning,
                stacklevel=3,
            )
        if abs(self.cavity_width - DEMONSTRATED_WIDTH) > tol:
            warnings.warn(
                f"cavity width {self.cavity_width / mm:g} mm differs from the demonstrated 2 mm",
                GeometryRangeWarning,
                stacklevel=3,
            )

    @classmethod
    def from_mm(cls, L: float, D: float, w: float = 2.0, depth: float | None = None) -> "ActuatorGeometry":
        return cls(
            cavity_length=L * mm,
            aperture_diameter=D * mm,
            cavity_width=w * mm,
            cavity_depth=None if depth is None else depth * mm,
        )

    @classmethod
    def from_label(cls, label: str) -> "ActuatorGeometry":
        """Build from a compact label such as ``"L8D6"`` or ``"L4D4W2"`` (mm)."""
        m = re.fullmatch(r"L([\d.]+)D([\d.]+)(?:W([\d.]+))?", label.strip(), flags=re.IGNORECASE)
        if m is None:
            raise ValueError(f"cannot parse geometry label {label!r}; expected e.g. 'L8D6'")
        L, D, w = m.groups()
        return cls.from_mm(float(L), float(D), 2.0 if w is None else float(w))

    @property
    def wire_length(self) -> float:
        """Total heated wire length ``2 L + 1 mm``."""
        return 2.0 * self.cavity_length + WIRE_ROUTING_EXTRA

    @property
    def pixel_area(self) -> float:
        return math.pi * (self.aperture_diameter / 2.0) ** 2

    @property
    def cavity_volume(self) -> float | None:
        if self.cavity_depth is None:
            return None
        return self.cavity_length * self.cavity_width * self.cavity_depth


@dataclass(frozen=True)
class ElectricalDrive:
    voltage: float
    wire_resistance: float

    def __post_init__(self):
        if not self.wire_resistance > 0:
            raise ValueError("wire resistance must be strictly positive")
        if self.voltage < 0:
            raise ValueError("drive voltage must be non-negative")


@dataclass(frozen=True)
class AmbientState:
    """Initial cavity temperature (K) and absolute pressure (Pa)."""

    T0: float = 293.15
    P0: float = 101325.0

    def __post_init__(self):
        if not (self.T0 > 0 and self.P0 > 0):
            raise ValueError("ambient temperature and pressure must be strictly positive")


@dataclass(frozen=True)
class ChainGains:
    """Memoryless gains from wire temperature to air temperature and force to displacement.

    ``air_gain`` is the ratio of air temperature rise to wire temperature rise;
    ``compliance`` is free displacement per unit blocked force, in m/N.
    """

    air_gain: float = 0.072
    compliance: float = 1.28 * mm_per_N

    def __post_init__(self):
        if not (self.air_gain > 0 and self.compliance > 0):
            raise ValueError("chain gains must be strictly positive")
        if not self.air_gain < 1:
            raise ValueError(f"air gain must be below 1 (air cannot heat more than the wire), got {self.air_gain}")


def electrical_power(drive: ElectricalDrive) -> float:
    return drive.voltage**2 / drive.wire_resistance


def power_per_length(power: float, geom: ActuatorGeometry) -> float:
    """Drive power divided by the total wire length, in W/m."""
    if power < 0:
        raise ValueError("power must be non-negative")
    return power / geom.wire_length


def power_from_rho(rho: float, geom: ActuatorGeometry) -> float:
    return rho * geom.wire_length


def air_temp_from_force(force: float, geom: ActuatorGeometry, ambient: AmbientState = AmbientState()) -> float:
    """Absolute cavity air temperature implied by a blocked membrane force."""
    floor = -ambient.P0 * geom.pixel_area
    if force < floor:
        raise ValueError(f"force {force} N implies an absolute cavity pressure below vacuum (floor {floor:.4g} N)")
    return ambient.T0 * (force / (ambient.P0 * geom.pixel_area) + 1.0)


def force_from_air_temp(T_air: float, geom: ActuatorGeometry, ambient: AmbientState = AmbientState()) -> float:
    if not T_air > 0:
        raise ValueError("absolute air temperature must be positive")
    return (T_air / ambient.T0 - 1.0) * ambient.P0 * geom.pixel_area


def gauge_pressure_from_air_temp(T_air, ambient: AmbientState = AmbientState()):
    return ambient.P0 * (T_air / ambient.T0 - 1.0)


def displacement_from_force(force: float, gains: ChainGains) -> float:
    """Free displacement (m) for a blocked force, constant-compliance approximation."""
    if force < 0:
        raise ValueError("force must be non-negative")
    return gains.compliance * force
