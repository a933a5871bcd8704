import itertools
import math

import numpy as np
import pytest
from mpmath import mp, mpf, sqrt, log, atan, pi

from micromag.backend import ParallelBackend
from micromag.core import Grid, VectorField, make_uniform_state
from micromag.demag import (COMPONENTS, DemagPipeline, build_demag_tensor, convolve_1d_padded,
                            demag_field, newell_f, newell_g, octant_table, pad_magnetization,
                            padded_dims, precompute_spectrum, spectral_multiply, wrap_index)
from micromag.fft import FftPlan, forward3d, plan_for
from micromag.oracle import direct_demag
from conftest import random_field

MS = 8e5


def aharoni_dz(a, b, c):
    """Demagnetizing factor along c of an a x b x c prism (Aharoni 1998), in mpmath."""
    mp.dps = 40
    a, b, c = mpf(a) / 2, mpf(b) / 2, mpf(c) / 2
    r = sqrt(a * a + b * b + c * c)
    ab, bc, ac = sqrt(a * a + b * b), sqrt(b * b + c * c), sqrt(a * a + c * c)
    s = ((b * b - c * c) / (2 * b * c) * log((r - a) / (r + a))
         + (a * a - c * c) / (2 * a * c) * log((r - b) / (r + b))
         + b / (2 * c) * log((ab + a) / (ab - a)) + a / (2 * c) * log((ab + b) / (ab - b))
         + c / (2 * a) * log((bc - b) / (bc + b)) + c / (2 * b) * log((ac - a) / (ac + a))
         + 2 * atan(a * b / (c * r)) + (a ** 3 + b ** 3 - 2 * c ** 3) / (3 * a * b * c)
         + (a * a + b * b - 2 * c * c) / (3 * a * b * c) * r + c / (a * b) * (ac + bc)
         - (ab ** 3 + bc ** 3 + ac ** 3) / (3 * a * b * c))
    return float(s / pi)


def self_term(cell):
    return build_demag_tensor(Grid(1, 1, 1, *cell)).matrix(0, 0, 0)


@pytest.mark.parametrize("ratio", [(1, 1, 1), (1, 1, 5), (2, 3, 4), (7, 1, 2)])
def test_self_term_matches_aharoni(ratio):
    K = self_term(tuple(r * 1e-9 for r in ratio))
    a, b, c = ratio
    expect = [aharoni_dz(b, c, a), aharoni_dz(c, a, b), aharoni_dz(a, b, c)]
    assert np.max(np.abs(np.diag(K) + np.array(expect))) <= 1e-13
    assert abs(np.trace(K) + 1) <= 1e-12


def test_cubic_self_term():
    K = self_term((3e-9, 3e-9, 3e-9))
    assert np.max(np.abs(np.diag(K) + 1 / 3)) <= 1e-12
    assert K[0, 1] == K[0, 2] == K[1, 2] == 0.0


# Reference entries for cubic cells, from the extended-precision oracle table
FROZEN_CUBIC = {
    ("xx", 1, 0, 0): 0.13501718054449527,
    ("xy", 1, 1, 0): 0.04556482263891465,
    ("xz", 1, 0, 1): 0.04556482263891465,
    ("yz", 1, 2, 1): 0.005417659146351281,
}


@pytest.mark.parametrize("key", FROZEN_CUBIC)
def test_frozen_neighbor_entries(key):
    K = build_demag_tensor(Grid.cube(3, 2e-9))
    assert K.at(*key) == pytest.approx(FROZEN_CUBIC[key], rel=1e-13)


def test_far_field_matches_dipole():
    K = build_demag_tensor(Grid(11, 1, 1, 1.0, 1.0, 1.0))
    # point dipole: Kxx = -(V/4pi)(r^2 - 3x^2)/r^5 with V = 1 and r = x = 10
    dipole = -(1 / (4 * math.pi)) * (100 - 300) / 10 ** 5
    assert K.at("xx", 10, 0, 0) == pytest.approx(dipole, rel=1e-2)
    assert K.at("xx", -10, 0, 0) == K.at("xx", 10, 0, 0)


def test_newell_parities(rng):
    x, y, z = rng.normal(size=(3, 50))
    assert np.array_equal(newell_f(x, y, z), newell_f(-x, -y, -z))
    assert np.allclose(newell_g(-x, y, z), -newell_g(x, y, z), rtol=1e-13, atol=0)
    assert np.allclose(newell_g(x, -y, z), -newell_g(x, y, z), rtol=1e-13, atol=0)
    assert np.array_equal(newell_g(x, y, -z), newell_g(x, y, z))


def test_off_diagonals_vanish_on_mirror_planes():
    T = octant_table(Grid(4, 3, 2, 1.0, 1.5, 2.0))
    xy, xz, yz = T[3], T[4], T[5]
    assert not xy[:, :, 0].any() and not xy[:, 0, :].any()
    assert not xz[:, :, 0].any() and not xz[0, :, :].any()
    assert not yz[:, 0, :].any() and not yz[0, :, :].any()


def test_wrap_index_examples():
    assert wrap_index(0, 2, 4) == 0
    assert [wrap_index(d, 2, 4) for d in (0, 1, -1)] == [0, 1, 3]
    assert wrap_index(-1, 4, 8) == 7
    assert wrap_index(3, 4, 8) == 3
    with pytest.raises(ValueError):
        wrap_index(4, 4, 8)


def test_layout_for_two_cells():
    K = build_demag_tensor(Grid(2, 1, 1, 1.0, 1.0, 1.0))
    line = K.component("xx")[0, 0]
    assert line.tolist() == [K.at("xx", 0, 0, 0), K.at("xx", 1, 0, 0), 0.0, K.at("xx", -1, 0, 0)]


def test_padded_dims():
    assert padded_dims(Grid(5, 3, 1, 1, 1, 1)) == (16, 8, 2)
    assert padded_dims(Grid(4, 8, 2, 1, 1, 1)) == (8, 16, 4)


def test_pad_magnetization():
    g = Grid.cube(4, 1e-9)
    M = random_field(g)
    P = pad_magnetization(M, (8, 8, 8))
    assert P.shape == (3, 8, 8, 8)
    assert P[0, 0, 0, 5] == 0.0
    assert P[1, 1, 2, 3] == M.data[1, 1, 2, 3]
    U = pad_magnetization(make_uniform_state(g, (0, 1, 0), MS).M, (8, 8, 8))
    assert U[1].sum() == 64 * MS and U[0].sum() == 0
    assert not pad_magnetization(VectorField.zeros(g), (8, 8, 8)).any()


def test_spectrum_properties():
    g = Grid(4, 2, 3, 1e-9, 2e-9, 1e-9)
    K = build_demag_tensor(g)
    S = precompute_spectrum(K, FftPlan(K.dims))
    assert S["xx"].data[0, 0, 0].real == pytest.approx(K.component("xx").sum(), rel=1e-13)
    for name in ("xx", "yy", "zz"):
        assert np.max(np.abs(S[name].data.imag)) <= 1e-10
    thin = build_demag_tensor(Grid(1, 1, 6, 1.0, 1.0, 1.0))
    S1 = precompute_spectrum(thin, FftPlan(thin.dims))
    assert not S1["xy"].data.any()


def test_spectral_multiply(rng):
    g = Grid(3, 3, 3, 1.0, 1.0, 1.0)
    K = build_demag_tensor(g)
    S = precompute_spectrum(K, FftPlan(K.dims))
    shape = S.plan.shape
    zero = np.zeros(shape, complex)
    assert not any(h.any() for h in spectral_multiply(zero, zero, zero, S))
    mx = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    hx, hy, hz = spectral_multiply(mx, zero, zero, S)
    assert np.array_equal(hy, mx * S["xy"].data)
    my = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    mz = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    hx, hy, hz = spectral_multiply(mx, my, mz, S)
    k = {n: S[n].data for n in COMPONENTS}
    for idx in [(0, 0, 0), (1, 2, 3), (5, 5, 5), (3, 0, 4)]:
        m = np.array([mx[idx], my[idx], mz[idx]])
        Kb = np.array([[k["xx"][idx], k["xy"][idx], k["xz"][idx]],
                       [k["xy"][idx], k["yy"][idx], k["yz"][idx]],
                       [k["xz"][idx], k["yz"][idx], k["zz"][idx]]])
        ref = Kb @ m
        got = np.array([hx[idx], hy[idx], hz[idx]])
        assert np.max(np.abs(got - ref)) <= 1e-13 * np.max(np.abs(ref))


def pipeline_field(M, **kw):
    return DemagPipeline(M.grid, **kw)(M.data)


def test_single_cube_cell():
    g = Grid.cube(1, 5e-9)
    H = pipeline_field(make_uniform_state(g, (1, 0, 0), MS).M)
    assert H[:, 0, 0, 0] == pytest.approx([-MS / 3, 0, 0], rel=1e-10, abs=1e-10 * MS)


def test_zero_in_zero_out():
    g = Grid(4, 3, 2, 1e-9, 1e-9, 1e-9)
    assert not pipeline_field(VectorField.zeros(g)).any()


@pytest.mark.parametrize("n", [(4, 4, 4), (5, 3, 2), (1, 1, 7), (3, 1, 1), (6, 5, 3)])
def test_matches_direct_sum(n):
    g = Grid(*n, 2e-9, 3e-9, 2.5e-9)
    M = random_field(g, seed=sum(n))
    ref = direct_demag(M).data
    H = pipeline_field(M)
    assert np.max(np.abs(H - ref)) / np.max(np.abs(ref)) <= 1e-11


def test_functional_path_matches_pipeline():
    g = Grid(5, 3, 2, 1e-9, 1e-9, 1e-9)
    M = random_field(g)
    K = build_demag_tensor(g)
    plan = plan_for(K.dims)
    H = demag_field(M, precompute_spectrum(K, plan), plan).data
    assert np.allclose(H, pipeline_field(M), rtol=0, atol=1e-12 * MS)


def test_padding_size_independence():
    g = Grid(3, 5, 2, 1e-9, 1e-9, 1e-9)
    M = random_field(g)
    a = pipeline_field(M)
    b = pipeline_field(M, dims=(16, 16, 8))
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_action_reaction():
    g = Grid(4, 3, 3, 1e-9, 1e-9, 1e-9)
    pipe = DemagPipeline(g)
    rng = np.random.default_rng(5)
    m1, m2 = VectorField.zeros(g), VectorField.zeros(g)
    m1.data[:, 0, 1, 0] = rng.normal(size=3) * MS
    m2.data[:, 2, 0, 3] = rng.normal(size=3) * MS
    e12 = float(np.sum(pipe(m1.data) * m2.data))
    e21 = float(np.sum(pipe(m2.data) * m1.data))
    assert abs(e12 - e21) <= 1e-11 * abs(e12)


@pytest.mark.parametrize("n", [4, 8])
def test_uniform_cube_factor(n):
    g = Grid.cube(n, 2e-9)
    H = pipeline_field(make_uniform_state(g, (0, 0, 1), MS).M)
    assert abs(H[2].mean() / MS + 1 / 3) <= 1e-9
    assert np.max(np.abs(H[:2].mean(axis=(1, 2, 3)))) <= 1e-9 * MS


def test_f32_pipeline():
    g = Grid(4, 4, 4, 1e-9, 1e-9, 1e-9)
    M = random_field(g)
    H = pipeline_field(M.astype(np.float32), precision="f32")
    assert H.dtype == np.float32
    ref = direct_demag(M).data
    assert np.max(np.abs(H - ref)) / np.max(np.abs(ref)) <= 1e-3


@pytest.mark.parametrize("provider", ["radix2", "numpy"])
def test_parallel_backend_bitwise(provider):
    g = Grid(16, 8, 12, 1e-9, 1e-9, 1e-9)
    M = random_field(g)
    serial = pipeline_field(M, provider=provider)
    with ParallelBackend(threads=3) as be:
        par = DemagPipeline(g, provider=provider, backend=be)(M.data)
    assert np.array_equal(serial, par)


@pytest.mark.parametrize("n", [1, 2, 3, 7])
def test_convolve_1d_matches_numpy(rng, n):
    m = rng.normal(size=n)
    k = rng.normal(size=2 * n - 1)
    ref = np.convolve(m, k)[n - 1:2 * n - 1]
    assert np.allclose(convolve_1d_padded(m, k), ref, rtol=0, atol=1e-12)
