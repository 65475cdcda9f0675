"""Project configuration: one JSON document, every physical key carries its unit.

Example::

    {
      "ambient": {"T0_K": 293.15, "P0_Pa": 101325},
      "geometries": {"pad": {"L_mm": 8, "D_mm": 6, "w_mm": 2}},
      "thermal": {"mode": "envelope", "tau_cool_ms": 110,
                  "air_gain": 0.072, "compliance_mm_per_N": 1.28},
      "envelope": {"a_mm_K_per_W": 6601, "b_uJ_per_mm_K": 6.51, "T_fail_K": 1400},
      "resistivity_table": "data/resistivity_template.csv",
      "safety_margin": 0.10,
      "output_dir": "out"
    }

``thermal.mode`` is ``envelope`` (R and C scaled from the envelope parameters
for each geometry), ``reference`` (single-tau model calibrated on the 8 mm /
6 mm pixel) or ``explicit`` (``R_thermal_K_per_W``, ``tau_heat_ms``,
``tau_cool_ms`` given directly). Relative paths resolve against the config
file's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .envelope import DEFAULT_MARGIN, EnvelopeFit
from .physics import ActuatorGeometry, AmbientState, ChainGains
from .thermal import ThermalModel, reference_model
from .units import mm_per_N

ENV_VAR = "THERMOPIX_CONFIG"

KNOWN_KEYS = {"ambient", "geometries", "thermal", "envelope", "resistivity_table", "safety_margin", "output_dir"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectConfig:
    ambient: AmbientState = AmbientState()
    geometries: dict = field(default_factory=dict)
    thermal: dict = field(default_factory=lambda: {"mode": "envelope", "tau_cool_ms": 110.0})
    envelope: EnvelopeFit = field(default_factory=EnvelopeFit.published)
    resistivity_table: Path | None = None
    safety_margin: float = DEFAULT_MARGIN
    output_dir: Path = Path("out")

    def geometry(self, name: str) -> ActuatorGeometry:
        if name in self.geometries:
            return self.geometries[name]
        try:
            return ActuatorGeometry.from_label(name)
        except ValueError:
            raise ConfigError(f"unknown geometry {name!r}; presets: {sorted(self.geometries)} or a label like 'L8D6'") from None

    def gains(self) -> ChainGains:
        th = self.thermal
        return ChainGains(
            air_gain=float(th.get("air_gain", ChainGains.air_gain)),
            compliance=float(th.get("compliance_mm_per_N", ChainGains.compliance / mm_per_N)) * mm_per_N,
        )

    def thermal_model(self, geom: ActuatorGeometry) -> ThermalModel:
        th = self.thermal
        mode = th.get("mode", "envelope")
        if mode == "reference":
            return reference_model(geom)
        T_fail = self.envelope.T_fail
        if mode == "envelope":
            return ThermalModel.from_envelope(
                self.envelope, geom, tau_cool=float(th.get("tau_cool_ms", 110.0)) * 1e-3, ambient=self.ambient, gains=self.gains()
            )
        if mode == "explicit":
            try:
                R = float(th["R_thermal_K_per_W"])
                tau_h = float(th["tau_heat_ms"]) * 1e-3
                tau_c = float(th.get("tau_cool_ms", th["tau_heat_ms"])) * 1e-3
            except KeyError as exc:
                raise ConfigError(f"explicit thermal mode needs {exc.args[0]}") from None
            C = float(th.get("heat_capacity_J_per_K", tau_h / R))
            return ThermalModel(R, C, tau_h, tau_c, geom, ambient=self.ambient, gains=self.gains(), T_fail=T_fail)
        raise ConfigError(f"unknown thermal mode {mode!r}")


def _parse(doc: dict, base: Path) -> ProjectConfig:
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    amb = doc.get("ambient", {})
    ambient = AmbientState(T0=float(amb.get("T0_K", 293.15)), P0=float(amb.get("P0_Pa", 101325.0)))
    geoms = {}
    for name, g in doc.get("geometries", {}).items():
        geoms[name] = ActuatorGeometry.from_mm(float(g["L_mm"]), float(g["D_mm"]), float(g.get("w_mm", 2.0)), g.get("depth_mm"))
    env = EnvelopeFit.from_dict(doc["envelope"]) if "envelope" in doc else EnvelopeFit.published()
    table = doc.get("resistivity_table")
    table_path = None
    if table is not None:
        table_path = (base / table).resolve()
        if not table_path.exists():
            raise ConfigError(f"resistivity table {table_path} does not exist")
    margin = float(doc.get("safety_margin", DEFAULT_MARGIN))
    if not 0 <= margin < 1:
        raise ConfigError("safety_margin must lie in [0, 1)")
    cfg = ProjectConfig(
        ambient=ambient,
        geometries=geoms,
        thermal=dict(doc.get("thermal", {"mode": "envelope", "tau_cool_ms": 110.0})),
        envelope=env,
        resistivity_table=table_path,
        safety_margin=margin,
        output_dir=Path(doc.get("output_dir", "out")),
    )
    # surface bad thermal parameters at load rather than first use
    cfg.gains()
    cfg.thermal_model(ActuatorGeometry.from_mm(8, 6))
    return cfg


def load_config(path=None) -> ProjectConfig:
    """Load from ``path``, else ``$THERMOPIX_CONFIG``, else built-in defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return ProjectConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
    return _parse(doc, p.parent)
