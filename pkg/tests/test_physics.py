import math
import warnings

import pytest
from hypothesis import given, strategies as st

from thermopix.physics import (
    ActuatorGeometry,
    AmbientState,
    ChainGains,
    ElectricalDrive,
    GeometryRangeWarning,
    air_temp_from_force,
    displacement_from_force,
    electrical_power,
    force_from_air_temp,
    power_per_length,
)
from thermopix.units import W_per_mm, mm, mm_per_N


@pytest.mark.parametrize("V, R, P", [(0, 7.5, 0.0), (1, 1, 1.0), (6, 7.5, 4.8)])
def test_electrical_power(V, R, P):
    assert electrical_power(ElectricalDrive(V, R)) == pytest.approx(P, rel=1e-15)


def test_drive_invariants():
    with pytest.raises(ValueError):
        ElectricalDrive(1.0, 0.0)
    with pytest.raises(ValueError):
        ElectricalDrive(-1.0, 5.0)


def test_power_per_length_examples():
    assert power_per_length(4.8, ActuatorGeometry.from_mm(8, 6)) / W_per_mm == pytest.approx(4.8 / 17)
    assert power_per_length(0.0, ActuatorGeometry.from_mm(4, 4)) == 0.0
    # 0.5 W/mm on L = 4 mm means 4.5 W over L_T = 9 mm
    assert power_per_length(4.5, ActuatorGeometry.from_mm(4, 4)) / W_per_mm == pytest.approx(0.5, rel=1e-14)


def test_wire_length_and_area():
    g = ActuatorGeometry.from_mm(8, 6)
    assert g.wire_length == pytest.approx(17 * mm)
    assert g.pixel_area == pytest.approx(math.pi * (3e-3) ** 2)


def test_geometry_rejects_nonpositive():
    with pytest.raises(ValueError):
        ActuatorGeometry.from_mm(0, 6)
    with pytest.raises(ValueError):
        ActuatorGeometry.from_mm(8, -1)


def test_geometry_range_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ActuatorGeometry.from_mm(2, 2)
        ActuatorGeometry.from_mm(10, 8)
    with pytest.warns(GeometryRangeWarning):
        ActuatorGeometry.from_mm(12, 6)
    with pytest.warns(GeometryRangeWarning):
        ActuatorGeometry.from_mm(8, 6, w=3)


def test_geometry_label():
    assert ActuatorGeometry.from_label("L8D6") == ActuatorGeometry.from_mm(8, 6)
    assert ActuatorGeometry.from_label("l4d4w2") == ActuatorGeometry.from_mm(4, 4)
    with pytest.raises(ValueError):
        ActuatorGeometry.from_label("8x6")


def test_cavity_volume_needs_depth():
    assert ActuatorGeometry.from_mm(8, 6).cavity_volume is None
    g = ActuatorGeometry.from_mm(8, 6, depth=1.0)
    assert g.cavity_volume == pytest.approx(16e-9)


def test_air_temp_zero_force(geom8, ambient):
    assert air_temp_from_force(0.0, geom8, ambient) == ambient.T0


def test_air_temp_published_point(geom8, ambient):
    T = air_temp_from_force(0.75, geom8, ambient)
    # 0.75 N over pi*(3 mm)^2 at 101325 Pa, 293.15 K
    assert T == pytest.approx(369.8936, abs=1e-3)
    assert T - 273.15 == pytest.approx(97.0, abs=1.0)


def test_air_temp_doubles(geom8, ambient):
    F = ambient.P0 * geom8.pixel_area
    assert air_temp_from_force(F, geom8, ambient) == pytest.approx(2 * ambient.T0, rel=1e-15)


def test_air_temp_rejects_below_vacuum(geom8, ambient):
    floor = -ambient.P0 * geom8.pixel_area
    air_temp_from_force(floor, geom8, ambient)
    with pytest.raises(ValueError):
        air_temp_from_force(floor * 1.001, geom8, ambient)


def test_force_from_air_temp(geom8, ambient):
    assert force_from_air_temp(ambient.T0, geom8, ambient) == 0.0
    assert force_from_air_temp(2 * ambient.T0, geom8, ambient) == pytest.approx(2.8648, abs=1e-4)
    with pytest.raises(ValueError):
        force_from_air_temp(0.0, geom8, ambient)
    T = air_temp_from_force(0.75, geom8, ambient)
    assert force_from_air_temp(T, geom8, ambient) == pytest.approx(0.75, rel=1e-13)


@given(st.floats(0.0, 5.0))
def test_force_air_round_trip(F):
    g = ActuatorGeometry.from_mm(8, 6)
    back = force_from_air_temp(air_temp_from_force(F, g), g)
    # relative 1e-12, with a 1e-15 N floor where T_air ~ T0 cancels
    assert back == pytest.approx(F, rel=1e-12, abs=1e-15)


@given(st.just(0.0) | st.floats(1e-12, 100.0), st.floats(2.0, 10.0))
def test_power_per_length_linear(P, L):
    g = ActuatorGeometry.from_mm(L, 4)
    assert power_per_length(P / 2, g) == power_per_length(P, g) / 2


@given(st.floats(0.5, 10.0))
def test_area_quadratic(D):
    a1 = ActuatorGeometry.from_mm(8, D).pixel_area
    a2 = ActuatorGeometry(8 * mm, 2 * D * mm).pixel_area
    assert a2 == pytest.approx(4 * a1, rel=1e-15)


def test_displacement():
    k = ChainGains(0.072, 1.28 * mm_per_N)
    assert displacement_from_force(0.0, k) == 0.0
    assert displacement_from_force(0.75, k) / mm == pytest.approx(0.96)
    assert displacement_from_force(0.375, k) / mm == pytest.approx(0.48)
    with pytest.raises(ValueError):
        displacement_from_force(-0.1, k)


def test_chain_gain_invariants():
    with pytest.raises(ValueError):
        ChainGains(1.0, 1e-3)
    with pytest.raises(ValueError):
        ChainGains(0.05, 0.0)


def test_ambient_invariants():
    with pytest.raises(ValueError):
        AmbientState(T0=0.0)
    with pytest.raises(ValueError):
        AmbientState(P0=-1.0)


def test_purity(geom8):
    a = [air_temp_from_force(0.3, geom8) for _ in range(3)]
    assert a[0] == a[1] == a[2]
