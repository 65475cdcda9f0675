"""Modeling, calibration and drive planning for thermopneumatic tactile pixels."""

from .envelope import EnvelopeFit, FailurePoint, boundary_rho, fit_envelope, is_safe, max_pulse_duration
from .physics import ActuatorGeometry, AmbientState, ChainGains, ElectricalDrive
from .thermal import PulseSchedule, SimTrace, ThermalModel, peak_force, reference_model, simulate, step_response
from .traces import Trace

__version__ = "0.1.0"

__all__ = [
    "ActuatorGeometry",
    "AmbientState",
    "ChainGains",
    "ElectricalDrive",
    "EnvelopeFit",
    "FailurePoint",
    "PulseSchedule",
    "SimTrace",
    "ThermalModel",
    "Trace",
    "boundary_rho",
    "fit_envelope",
    "is_safe",
    "max_pulse_duration",
    "peak_force",
    "reference_model",
    "simulate",
    "step_response",
]
