import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from micromag.backend import ParallelBackend
from micromag.fft import (FftPlan, Spectrum, UnsupportedSize, bit_reverse_permutation, fft1d,
                          forward3d, inverse3d, plan_for)
from micromag.oracle import naive_dft3d


def lattice(rng, dims):
    return rng.normal(size=tuple(reversed(dims)))


def rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_delta_has_flat_spectrum():
    x = np.zeros((4, 4, 4))
    x[0, 0, 0] = 1.0
    S = forward3d(plan_for((4, 4, 4)), x)
    assert np.allclose(S.data, 1.0, atol=1e-15)


def test_constant_is_dc_only():
    S = forward3d(plan_for((4, 4, 4)), np.full((4, 4, 4), 2.5)).data
    assert S[0, 0, 0] == pytest.approx(64 * 2.5)
    S[0, 0, 0] = 0
    assert np.max(np.abs(S)) <= 1e-13


@pytest.mark.parametrize("dims", [(8, 8, 8), (4, 2, 8), (2, 16, 4)])
def test_matches_naive_dft(rng, dims):
    x = lattice(rng, dims)
    S = forward3d(plan_for(dims), x)
    ref = naive_dft3d(x)
    assert rel(S.data, ref.data) <= 1e-12


@pytest.mark.parametrize("provider", ["radix2", "numpy"])
def test_providers_agree_with_numpy_fftn(rng, provider):
    x = lattice(rng, (16, 8, 4))
    S = forward3d(plan_for((16, 8, 4), provider=provider), x)
    assert rel(S.data, np.fft.fftn(x)) <= 1e-13


def test_roundtrip(rng):
    plan = plan_for((4, 4, 4))
    x = lattice(rng, (4, 4, 4))
    assert np.max(np.abs(inverse3d(plan, forward3d(plan, x)) - x)) <= 1e-13


def test_all_ones_spectrum_inverts_to_delta():
    plan = plan_for((4, 8, 2))
    y = inverse3d(plan, Spectrum(plan.dims, np.ones(plan.shape, complex)))
    expect = np.zeros(plan.shape)
    expect[0, 0, 0] = 1.0
    assert np.max(np.abs(y - expect)) <= 1e-15


def test_parseval(rng):
    plan = plan_for((8, 4, 8))
    x = lattice(rng, plan.dims)
    S = forward3d(plan, x).data
    lhs = np.sum(x * x)
    rhs = np.sum(np.abs(S) ** 2) / x.size
    assert abs(lhs - rhs) <= 1e-12 * lhs


def test_conjugate_symmetry(rng):
    plan = plan_for((8, 4, 2))
    S = forward3d(plan, lattice(rng, plan.dims))
    Px, Py, Pz = plan.dims
    for w, v, u in np.ndindex(Pz, Py, Px):
        mirror = S[(-u) % Px, (-v) % Py, (-w) % Pz]
        assert abs(S[u, v, w] - np.conj(mirror)) <= 1e-13 * np.max(np.abs(S.data))


def test_linearity(rng):
    plan = plan_for((4, 4, 8))
    x, y = lattice(rng, plan.dims), lattice(rng, plan.dims)
    lhs = forward3d(plan, 2.0 * x - 0.5 * y).data
    rhs = 2.0 * forward3d(plan, x).data - 0.5 * forward3d(plan, y).data
    assert rel(lhs, rhs) <= 1e-12


def test_convolution_theorem(rng):
    plan = plan_for((4, 4, 4))
    x, y = lattice(rng, plan.dims), lattice(rng, plan.dims)
    conv = inverse3d(plan, Spectrum(plan.dims, forward3d(plan, x).data * forward3d(plan, y).data))
    ref = np.zeros((4, 4, 4))
    for a in np.ndindex(4, 4, 4):
        for b in np.ndindex(4, 4, 4):
            c = tuple((i - j) % 4 for i, j in zip(a, b))
            ref[a] += x[b] * y[c]
    assert rel(conv, ref) <= 1e-11


def test_plan_sizes():
    assert plan_for((8, 8, 8)).dims == (8, 8, 8)
    with pytest.raises(UnsupportedSize):
        FftPlan((6, 8, 8))
    with pytest.raises(UnsupportedSize):
        FftPlan((1, 8, 8))


def test_repeat_is_bitwise_identical(rng):
    plan = plan_for((8, 8, 8))
    x = lattice(rng, plan.dims)
    assert np.array_equal(forward3d(plan, x).data, forward3d(plan, x).data)


def test_parallel_backend_is_bitwise_identical(rng):
    plan = plan_for((32, 16, 32))
    x = lattice(rng, plan.dims)
    with ParallelBackend(threads=4) as be:
        assert np.array_equal(forward3d(plan, x).data, forward3d(plan, x, be).data)


def test_f32_plan(rng):
    plan = plan_for((8, 8, 8), "f32")
    x = lattice(rng, plan.dims).astype(np.float32)
    S = forward3d(plan, x)
    assert S.data.dtype == np.complex64
    assert rel(S.data, np.fft.fftn(x.astype(np.float64))) <= 1e-5


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 7))
def test_fft1d_matches_numpy(k):
    n = 2 ** k
    x = np.random.default_rng(k).normal(size=n)
    assert np.allclose(fft1d(x), np.fft.fft(x), rtol=0, atol=1e-12 * n)
    assert np.allclose(fft1d(fft1d(x), inverse=True), x, rtol=0, atol=1e-13)


def test_bit_reverse():
    assert bit_reverse_permutation(8).tolist() == [0, 4, 2, 6, 1, 5, 3, 7]
