"""Demagnetizing field by zero-padded FFT convolution.

The field is ``H = K * M``: a linear convolution of the magnetization with a
symmetric 3x3 tensor kernel whose self term has trace -1 (a uniformly
magnetized isolated cube sees ``H = -M/3``). Kernel entries are Newell's
cell-averaged expressions, evaluated in extended precision on a lattice of
corner offsets and second-differenced along each axis.

Padded layout per axis (``n`` cells, padded size ``P >= 2n``, power of two)::

    kernel: [K(0), K(1), ..., K(n-1), 0, ..., 0, K(-(n-1)), ..., K(-1)]
    magnetization: [M(0), ..., M(n-1), 0, ..., 0]

so the cyclic convolution of length ``P`` equals the linear one on ``[0, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Grid, VectorField
from .fft import FftPlan, Spectrum, fft1d, next_pow2

COMPONENTS = ("xx", "yy", "zz", "xy", "xz", "yz")

# (tensor row, tensor column) for each stored component
_PAIRS = {"xx": (0, 0), "yy": (1, 1), "zz": (2, 2), "xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}

_LD = np.longdouble


# -- Newell kernels --------------------------------------------------------

def newell_f(x, y, z):
    """Newell's f, even in every argument."""
    x, y, z = np.abs(x), np.abs(y), np.abs(z)
    x2, y2, z2 = x * x, y * y, z * z
    R = np.sqrt(x2 + y2 + z2)
    rxz = np.sqrt(x2 + z2)
    rxy = np.sqrt(x2 + y2)
    # each transcendental term carries a prefactor that vanishes where its
    # argument is singular, so those terms are exactly zero there
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(rxz > 0, y * (z2 - x2) * np.arcsinh(y / rxz) / 2, 0)
        t2 = np.where(rxy > 0, z * (y2 - x2) * np.arcsinh(z / rxy) / 2, 0)
        t3 = np.where(x * R > 0, x * y * z * np.arctan(y * z / (x * R)), 0)
    return t1 + t2 - t3 + (2 * x2 - y2 - z2) * R / 6


def newell_g(x, y, z):
    """Newell's g, odd in ``x`` and ``y``, even in ``z``."""
    z = np.abs(z)
    x2, y2, z2 = x * x, y * y, z * z
    R = np.sqrt(x2 + y2 + z2)
    rxy = np.sqrt(x2 + y2)
    ryz = np.sqrt(y2 + z2)
    rxz = np.sqrt(x2 + z2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(rxy > 0, x * y * z * np.arcsinh(z / rxy), 0)
        t2 = np.where(ryz > 0, y * (3 * z2 - y2) * np.arcsinh(x / ryz) / 6, 0)
        t3 = np.where(rxz > 0, x * (3 * z2 - x2) * np.arcsinh(y / rxz) / 6, 0)
        t4 = np.where(z * R != 0, z2 * z * np.arctan(x * y / (z * R)) / 6, 0)
        t5 = np.where(y * R != 0, z * y2 * np.arctan(x * z / (y * R)) / 2, 0)
        t6 = np.where(x * R != 0, z * x2 * np.arctan(y * z / (x * R)) / 2, 0)
    return t1 + t2 + t3 - t4 - t5 - t6 - x * y * R / 3


# argument order fed to f or g for each component, as indices into (x, y, z)
_KERNELS = {
    "xx": (newell_f, (0, 1, 2)),
    "yy": (newell_f, (1, 2, 0)),
    "zz": (newell_f, (2, 0, 1)),
    "xy": (newell_g, (0, 1, 2)),
    "xz": (newell_g, (0, 2, 1)),
    "yz": (newell_g, (1, 2, 0)),
}


def _second_difference(F: np.ndarray) -> np.ndarray:
    """Apply weights (-1, 2, -1) along all three axes, shrinking each by 2."""
    for ax in range(3):
        F = np.moveaxis(F, ax, 0)
        F = 2 * F[1:-1] - F[:-2] - F[2:]
        F = np.moveaxis(F, 0, ax)
    return F


def octant_table(grid: Grid) -> np.ndarray:
    """Tensor entries for displacements ``0 <= (X, Y, Z) < (nx, ny, nz)``.

    Returns ``(6, nz, ny, nx)`` float64 in :data:`COMPONENTS` order, with
    off-diagonal entries exactly zero where parity demands it.
    """
    scale = max(grid.cell)
    h = [_LD(c) / _LD(scale) for c in grid.cell]
    axes = [np.arange(-1, n + 1, dtype=_LD) * hc for n, hc in zip(grid.n, h)]
    # lattice arrays indexed [k, j, i] to match field storage
    Z, Y, X = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    xyz = (X, Y, Z)
    coef = _LD(-1) / (4 * _LD(math.pi) * h[0] * h[1] * h[2])
    out = np.empty((6,) + grid.shape, dtype=np.float64)
    for c, name in enumerate(COMPONENTS):
        fn, order = _KERNELS[name]
        F = fn(*(xyz[a] for a in order))
        out[c] = (coef * _second_difference(F)).astype(np.float64)
    # odd parity: entries on the mirror planes vanish
    out[3][:, :, 0] = 0.0
    out[3][:, 0, :] = 0.0
    out[4][:, :, 0] = 0.0
    out[4][0, :, :] = 0.0
    out[5][:, 0, :] = 0.0
    out[5][0, :, :] = 0.0
    return out


def _parity(name: str, sx: int, sy: int, sz: int) -> int:
    a, b = _PAIRS[name]
    if a == b:
        return 1
    s = (sx, sy, sz)
    return s[a] * s[b]


# -- layout -----------------------------------------------------------------

def padded_size(n: int) -> int:
    return max(2, next_pow2(2 * n))


def padded_dims(grid: Grid) -> tuple[int, int, int]:
    """``(Px, Py, Pz)``: the next power of two at or above ``2n`` per axis."""
    return tuple(padded_size(n) for n in grid.n)


def wrap_index(d: int, n: int, P: int) -> int:
    if not -(n - 1) <= d <= n - 1:
        raise ValueError(f"displacement {d} outside [-{n - 1}, {n - 1}]")
    if P < 2 * n - 1:
        raise ValueError(f"padded size {P} too small for {n} cells")
    return d if d >= 0 else P + d


def _check_dims(grid: Grid, dims: Sequence[int]):
    for n, P, ax in zip(grid.n, dims, "xyz"):
        if P < 2 * n - 1 or P < 2:
            raise ValueError(f"padded size {P} along {ax} too small for {n} cells")


@dataclass(frozen=True)
class DemagTensorReal:
    """Six padded real kernel lattices ``(6, Pz, Py, Px)`` in :data:`COMPONENTS` order."""

    grid: Grid
    dims: tuple[int, int, int]
    data: np.ndarray

    def component(self, name: str) -> np.ndarray:
        return self.data[COMPONENTS.index(name)]

    def at(self, name: str, X: int, Y: int, Z: int) -> float:
        Px, Py, Pz = self.dims
        nx, ny, nz = self.grid.n
        return float(self.component(name)[wrap_index(Z, nz, Pz), wrap_index(Y, ny, Py),
                                           wrap_index(X, nx, Px)])

    def matrix(self, X: int, Y: int, Z: int) -> np.ndarray:
        m = np.empty((3, 3))
        for name, (a, b) in _PAIRS.items():
            m[a, b] = m[b, a] = self.at(name, X, Y, Z)
        return m


def build_demag_tensor(grid: Grid, dims: Optional[Sequence[int]] = None) -> DemagTensorReal:
    dims = tuple(dims) if dims is not None else padded_dims(grid)
    _check_dims(grid, dims)
    table = octant_table(grid)
    Px, Py, Pz = dims
    nx, ny, nz = grid.n
    data = np.zeros((6, Pz, Py, Px), dtype=np.float64)

    def targets(n, P, sign):
        d = np.arange(n) if sign > 0 else np.arange(1, n)
        return d, (d if sign > 0 else P - d)

    for sz in (1, -1):
        kz_src, kz_dst = targets(nz, Pz, sz)
        for sy in (1, -1):
            jy_src, jy_dst = targets(ny, Py, sy)
            for sx in (1, -1):
                ix_src, ix_dst = targets(nx, Px, sx)
                if not (len(kz_src) and len(jy_src) and len(ix_src)):
                    continue
                src = np.ix_(kz_src, jy_src, ix_src)
                dst = np.ix_(kz_dst, jy_dst, ix_dst)
                for c, name in enumerate(COMPONENTS):
                    p = _parity(name, sx, sy, sz)
                    data[c][dst] = table[c][src] if p > 0 else -table[c][src]
    return DemagTensorReal(grid, dims, data)


def pad_magnetization(M: VectorField, dims: Sequence[int]) -> np.ndarray:
    """Zero-padded copy ``(3, Pz, Py, Px)``; source cells keep indices ``[0, n)``."""
    dims = tuple(dims)
    _check_dims(M.grid, dims)
    nx, ny, nz = M.grid.n
    out = np.zeros((3,) + tuple(reversed(dims)), dtype=M.data.dtype)
    out[:, :nz, :ny, :nx] = M.data
    return out


# -- spectral stage -----------------------------------------------------------

@dataclass(frozen=True)
class DemagSpectrum:
    """Transforms of the six kernel lattices; built once per grid and precision."""

    grid: Grid
    dims: tuple[int, int, int]
    plan: FftPlan
    components: dict

    def __getitem__(self, name: str) -> Spectrum:
        return self.components[name]


def precompute_spectrum(K: DemagTensorReal, plan: FftPlan, backend=None) -> DemagSpectrum:
    if tuple(K.dims) != plan.dims:
        raise ValueError(f"tensor dims {K.dims} do not match plan {plan.dims}")
    comps = {}
    src = np.empty(plan.shape, plan.complex_dtype)
    for c, name in enumerate(COMPONENTS):
        src[...] = K.data[c]
        dst = np.empty(plan.shape, plan.complex_dtype)
        comps[name] = Spectrum(plan.dims, plan.execute(src, dst, False, backend))
    return DemagSpectrum(K.grid, plan.dims, plan, comps)


def _multiply_block(sl, mx, my, mz, k, hx, hy, hz, tmp):
    """Per-bin symmetric 3x3 product on the slab ``sl`` of the bin lattice."""
    a, b, c = mx[sl], my[sl], mz[sl]
    t = tmp[sl]
    for h, (k1, k2, k3) in ((hx, ("xx", "xy", "xz")),
                             (hy, ("xy", "yy", "yz")),
                             (hz, ("xz", "yz", "zz"))):
        o = h[sl]
        np.multiply(a, k[k1][sl], out=o)
        np.multiply(b, k[k2][sl], out=t)
        o += t
        np.multiply(c, k[k3][sl], out=t)
        o += t


def spectral_multiply(mx, my, mz, spectrum: DemagSpectrum, out=None, backend=None):
    """``H~ = K~ M~`` bin by bin using the six stored components."""
    shape = spectrum.plan.shape
    arrays = [s.data if isinstance(s, Spectrum) else np.asarray(s) for s in (mx, my, mz)]
    for a in arrays:
        if a.shape != shape:
            raise ValueError(f"spectrum shape {a.shape} does not match kernel {shape}")
    if out is None:
        out = np.empty((3,) + shape, dtype=np.result_type(arrays[0], spectrum.plan.complex_dtype))
    tmp = np.empty(shape, dtype=out.dtype)
    k = {name: s.data for name, s in spectrum.components.items()}
    chunks = backend.split(shape[0], shape[1] * shape[2]) if backend else [slice(0, shape[0])]

    def task(t):
        _multiply_block(chunks[t], *arrays, k, out[0], out[1], out[2], tmp)

    if backend is None:
        task(0)
    else:
        backend.run_tasks(task, len(chunks))
    return out[0], out[1], out[2]


class DemagPipeline:
    """Preallocated per-step demag evaluation: pad, 3 FFTs, multiply, 3 inverse FFTs, crop."""

    def __init__(self, grid: Grid, precision: str = "f64", provider: str = "radix2",
                 backend=None, dims: Optional[Sequence[int]] = None,
                 tensor: Optional[DemagTensorReal] = None):
        self.grid = grid
        self.backend = backend
        self.tensor = tensor if tensor is not None else build_demag_tensor(grid, dims)
        self.plan = FftPlan(self.tensor.dims, precision, provider)
        self.spectrum = precompute_spectrum(self.tensor, self.plan, backend)
        shape = self.plan.shape
        cd = self.plan.complex_dtype
        self._padded = np.zeros((3,) + shape, dtype=cd)
        self._mspec = np.empty((3,) + shape, dtype=cd)
        self._hspec = np.empty((3,) + shape, dtype=cd)
        self._hpad = np.empty((3,) + shape, dtype=cd)
        self.transforms = 0

    @property
    def real_dtype(self):
        return self.plan.real_dtype

    def __call__(self, m: np.ndarray, out: Optional[np.ndarray] = None) -> np.ndarray:
        nx, ny, nz = self.grid.n
        if m.shape != (3, nz, ny, nx):
            raise ValueError(f"magnetization shape {m.shape} does not match grid {self.grid.n}")
        timer = self.backend.timer if self.backend is not None else None
        plan, be = self.plan, self.backend
        with _phase(timer, "pad"):
            # padding region was zeroed at allocation and is never written
            self._padded[:, :nz, :ny, :nx] = m
        with _phase(timer, "forward_fft"):
            for c in range(3):
                plan.execute(self._padded[c], self._mspec[c], False, be)
        with _phase(timer, "spectral_multiply"):
            spectral_multiply(self._mspec[0], self._mspec[1], self._mspec[2],
                              self.spectrum, out=self._hspec, backend=be)
        with _phase(timer, "inverse_fft"):
            for c in range(3):
                plan.execute(self._hspec[c], self._hpad[c], True, be)
        self.transforms += 6
        if out is None:
            out = np.empty((3, nz, ny, nx), dtype=self.real_dtype)
        with _phase(timer, "pad"):
            out[...] = self._hpad[:, :nz, :ny, :nx].real
        return out


class _Null:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


_NULL = _Null()


def _phase(timer, name):
    return timer.phase(name) if timer is not None else _NULL


def demag_field(M: VectorField, spectrum: DemagSpectrum, plan: Optional[FftPlan] = None,
                backend=None) -> VectorField:
    """Demag field of ``M`` through the padded FFT pipeline (six transforms)."""
    plan = plan if plan is not None else spectrum.plan
    if M.grid != spectrum.grid:
        raise ValueError("spectrum was built for a different grid")
    if plan.dims != spectrum.dims:
        raise ValueError(f"plan dims {plan.dims} do not match spectrum {spectrum.dims}")
    nx, ny, nz = M.grid.n
    padded = pad_magnetization(M, plan.dims).astype(plan.complex_dtype)
    mspec = np.empty_like(padded)
    for c in range(3):
        plan.execute(padded[c], mspec[c], False, backend)
    hspec = np.empty_like(padded)
    spectral_multiply(mspec[0], mspec[1], mspec[2], spectrum, out=hspec, backend=backend)
    hpad = np.empty_like(padded)
    for c in range(3):
        plan.execute(hspec[c], hpad[c], True, backend)
    return VectorField(M.grid, hpad[:, :nz, :ny, :nx].real.astype(plan.real_dtype))


def convolve_1d_padded(m: Sequence[float], kernel: Sequence[float]) -> np.ndarray:
    """Linear convolution ``H(i) = sum_l M(l) K(i - l)`` via one padded FFT.

    ``kernel[d + n - 1]`` holds ``K(d)`` for ``d`` in ``[-(n-1), n-1]``. For
    kernels even under ``d -> -d`` (the demag tensor) this is the same as
    ``sum_l M(l) K(l - i)``.
    """
    m = np.asarray(m, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    n = m.size
    if kernel.size != 2 * n - 1:
        raise ValueError(f"kernel needs {2 * n - 1} values for {n} cells, got {kernel.size}")
    P = padded_size(n)
    mp = np.zeros(P)
    mp[:n] = m
    kp = np.zeros(P)
    for d in range(-(n - 1), n):
        kp[wrap_index(d, n, P)] = kernel[d + n - 1]
    h = fft1d(fft1d(mp) * fft1d(kp), inverse=True)
    return h[:n].real.copy()
