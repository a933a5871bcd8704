import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from micromag.core import (EnergyBreakdown, Grid, MaterialParams, SimState, VectorField,
                           make_uniform_state, make_vortex_state, parse_axis, reduced_mean)


def test_grid_validation():
    with pytest.raises(ValueError, match="nx"):
        Grid(0, 1, 1, 1e-9, 1e-9, 1e-9)
    with pytest.raises(ValueError, match="dz"):
        Grid(1, 1, 1, 1e-9, 1e-9, 0.0)
    g = Grid(4, 3, 2, 1e-9, 2e-9, 3e-9)
    assert g.cell_count == 24
    assert g.shape == (2, 3, 4)
    assert g.cell_volume == pytest.approx(6e-27)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.data())
def test_index_bijection(nx, ny, nz, data):
    g = Grid(nx, ny, nz, 1.0, 1.0, 1.0)
    i = data.draw(st.integers(0, nx - 1))
    j = data.draw(st.integers(0, ny - 1))
    k = data.draw(st.integers(0, nz - 1))
    idx = g.index(i, j, k)
    assert idx == i + nx * (j + ny * k)
    assert g.unindex(idx) == (i, j, k)


def test_flat_layout_matches_index():
    g = Grid(3, 2, 2, 1.0, 1.0, 1.0)
    f = VectorField.zeros(g)
    f.data[1, 1, 0, 2] = 7.0  # (i, j, k) = (2, 0, 1)
    assert f.flat()[g.index(2, 0, 1), 1] == 7.0


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialParams(Ms=0)
    with pytest.raises(ValueError):
        MaterialParams(Ms=1, easy_axis=(1, 1, 0))
    assert MaterialParams(Ms=1, easy_axis=(0, 0, 1)).easy_axis == (0.0, 0.0, 1.0)


def test_uniform_state_examples():
    s = make_uniform_state(Grid.cube(2, 1e-9), (1, 0, 0), 8e5)
    assert np.all(s.M.x == 8e5) and np.all(s.M.y == 0) and np.all(s.M.z == 0)
    s = make_uniform_state(Grid(3, 2, 1, 1, 1, 1), (0, 0, 1), 1.0)
    assert np.all(s.M.z == 1.0)
    r = math.sqrt(0.5)
    s = make_uniform_state(Grid.cube(1, 1e-9), (r, r, 0), 1e6)
    assert abs(s.M.norms()[0, 0, 0] - 1e6) <= 1e-9 * 1e6


def test_uniform_roundtrips_through_reduced_mean():
    u = np.array([2.0, -1.0, 2.0]) / 3.0
    s = make_uniform_state(Grid(3, 4, 5, 1, 1, 1), u, 5e5)
    assert np.max(np.abs(reduced_mean(s, 5e5) - u)) <= 1e-12


def test_vortex_small_grid_circulation():
    g = Grid(3, 3, 1, 1.0, 1.0, 1.0)
    M = make_vortex_state(g, "+z", 1.0).M
    assert tuple(M.cell(1, 1, 0)) == (0.0, 0.0, 1.0)
    east = M.cell(2, 1, 0)
    west = M.cell(0, 1, 0)
    assert east == pytest.approx((0.0, 1.0, 0.0))
    assert west == pytest.approx((0.0, -1.0, 0.0))


def test_vortex_negative_axis_reverses_circulation():
    g = Grid(3, 3, 1, 1.0, 1.0, 1.0)
    M = make_vortex_state(g, "-z", 1.0).M
    assert M.cell(2, 1, 0) == pytest.approx((0.0, -1.0, 0.0))
    assert M.cell(1, 1, 0) == pytest.approx((0.0, 0.0, -1.0))


def test_vortex_16_cube_mean():
    Ms = 8e5
    s = make_vortex_state(Grid.cube(16, 1e-9), "+z", Ms)
    m = reduced_mean(s, Ms)
    assert abs(m[0]) <= 1e-9 and abs(m[1]) <= 1e-9
    # 2x2 core columns out of 16x16 point along +z
    assert m[2] == pytest.approx(4 / 256, abs=1e-15)
    assert np.max(np.abs(s.M.norms() / Ms - 1)) <= 1e-12


def test_vortex_needs_two_perpendicular_cells():
    with pytest.raises(ValueError, match="needs >= 2 cells"):
        make_vortex_state(Grid(1, 4, 4, 1, 1, 1), "+z", 1.0)


def test_parse_axis():
    assert tuple(parse_axis("-y")) == (0.0, -1.0, 0.0)
    assert tuple(parse_axis((0, 0, 1))) == (0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        parse_axis((1, 1, 0))
    with pytest.raises(ValueError):
        parse_axis("w")


def test_reduced_mean_cancellation():
    g = Grid(2, 1, 1, 1, 1, 1)
    data = np.zeros((3, 1, 1, 2))
    data[0, 0, 0] = [3.0, -3.0]
    assert np.all(reduced_mean(SimState(VectorField(g, data)), 3.0) == 0)


def test_vectorfield_shape_checks():
    g = Grid(2, 2, 2, 1, 1, 1)
    with pytest.raises(ValueError):
        VectorField(g, np.zeros(23))
    assert VectorField(g, np.arange(24.0)).data.shape == (3, 2, 2, 2)


def test_energy_breakdown_total():
    e = EnergyBreakdown(1.0, 2.0, 3.0, -4.0)
    assert e.total == 2.0
    with pytest.raises(ValueError):
        EnergyBreakdown(1.0, 2.0, 3.0, -4.0, total=5.0)
