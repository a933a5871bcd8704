"""Three-dimensional DFT with reusable plans.

Convention: forward transforms are unnormalized,
``S[w, v, u] = sum x[n, m, l] exp(-2 pi i (u l / Px + v m / Py + w n / Pz))``,
and inverse transforms carry the ``1 / (Px Py Pz)`` factor. Lattices are
shaped ``(Pz, Py, Px)``; ``dims`` is always quoted as ``(Px, Py, Pz)``.

Two providers implement the transform behind :class:`FftPlan`:

``radix2``
    In-house iterative Cooley-Tukey, vectorized over all lines of a pass.
``numpy``
    numpy's pocketfft, for speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

PRECISIONS = {
    "f64": (np.float64, np.complex128),
    "f32": (np.float32, np.complex64),
}


class UnsupportedSize(ValueError):
    pass


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _twiddles(n: int, inverse: bool, dtype) -> list[np.ndarray]:
    sign = 1.0 if inverse else -1.0
    out = []
    h = 1
    while h < n:
        k = np.arange(h)
        out.append(np.exp(sign * 1j * np.pi * k / h).astype(dtype))
        h *= 2
    return out


@dataclass(frozen=True)
class Spectrum:
    """Complex spectrum of a ``(Pz, Py, Px)`` lattice, full (not half) layout."""

    dims: tuple[int, int, int]
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != tuple(reversed(self.dims)):
            raise ValueError(f"spectrum data shape {self.data.shape} does not match dims {self.dims}")

    def __getitem__(self, uvw):
        u, v, w = uvw
        return self.data[w, v, u]


class Radix2Provider:
    name = "radix2"

    def prepare(self, plan: "FftPlan"):
        plan.perm = [bit_reverse_permutation(p) for p in plan.shape]
        plan.twiddle = {inv: [_twiddles(p, inv, plan.complex_dtype) for p in plan.shape]
                        for inv in (False, True)}

    def _butterflies(self, plan, a: np.ndarray, axis: int, inverse: bool, tmp: np.ndarray):
        """In-place DIT butterflies on bit-reversed lines of ``a`` along ``axis``."""
        P = a.shape[axis]
        head, tail = a.shape[:axis], a.shape[axis + 1:]
        sh, st = a.strides[:axis], a.strides[axis + 1:]
        s = a.strides[axis]
        bcast = (slice(None),) + (None,) * len(tail)
        pick_even = (slice(None),) * (axis + 1) + (0,)
        pick_odd = (slice(None),) * (axis + 1) + (1,)
        h = 1
        for tw in plan.twiddle[inverse][axis]:
            view = as_strided(a, head + (P // (2 * h), 2, h) + tail,
                              sh + (2 * h * s, h * s, s) + st)
            even, odd = view[pick_even], view[pick_odd]
            t = tmp[:even.size].reshape(even.shape)
            np.multiply(odd, tw[bcast], out=t)
            np.subtract(even, t, out=odd)
            np.add(even, t, out=even)
            h *= 2

    def axis_pass(self, plan, src, dst, axis, inverse, tmp):
        np.take(src, plan.perm[axis], axis=axis, out=dst, mode="clip")
        self._butterflies(plan, dst, axis, inverse, tmp)


class NumpyProvider:
    name = "numpy"

    def prepare(self, plan: "FftPlan"):
        pass

    def axis_pass(self, plan, src, dst, axis, inverse, tmp):
        fn = np.fft.ifft if inverse else np.fft.fft
        # numpy normalizes each inverse axis; the plan applies 1/P once at the end
        dst[...] = fn(src, axis=axis, norm="forward" if inverse else "backward")


PROVIDERS = {"radix2": Radix2Provider, "numpy": NumpyProvider}


class FftPlan:
    """Reusable transform plan for one padded size and precision."""

    def __init__(self, dims: Sequence[int], precision: str = "f64", provider: str = "radix2"):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or not all(d >= 2 and is_pow2(d) for d in dims):
            raise UnsupportedSize(f"padded sizes must be powers of two >= 2, got {dims}")
        if precision not in PRECISIONS:
            raise ValueError(f"precision must be 'f32' or 'f64', got {precision!r}")
        if provider not in PROVIDERS:
            raise ValueError(f"unknown FFT provider {provider!r}; choose from {sorted(PROVIDERS)}")
        self.dims = dims
        self.shape = tuple(reversed(dims))
        self.size = dims[0] * dims[1] * dims[2]
        self.precision = precision
        self.real_dtype, self.complex_dtype = PRECISIONS[precision]
        self.provider = PROVIDERS[provider]()
        self.provider.prepare(self)
        self.workspace = np.zeros(self.shape, dtype=self.complex_dtype)
        self._scratch: dict = {}

    def __repr__(self):
        return f"FftPlan(dims={self.dims}, precision={self.precision!r}, provider={self.provider.name!r})"

    def _tmp(self, key, n: int) -> np.ndarray:
        buf = self._scratch.get(key)
        if buf is None:
            buf = self._scratch[key] = np.empty(max(n // 2, 1), dtype=self.complex_dtype)
        return buf

    def _pass(self, src, dst, axis, inverse, backend):
        # lines along `axis` are independent; split them over another lattice axis
        caxis = 1 if axis == 0 else 0
        n = self.shape[caxis]
        per = self.size // n
        chunks = backend.split(n, per) if backend is not None else [slice(0, n)]

        def task(t):
            sl = chunks[t]
            idx = [slice(None)] * 3
            idx[caxis] = sl
            idx = tuple(idx)
            tmp = self._tmp((axis, sl.start, sl.stop), (sl.stop - sl.start) * per)
            self.provider.axis_pass(self, src[idx], dst[idx], axis, inverse, tmp)

        if backend is None:
            task(0)
        else:
            backend.run_tasks(task, len(chunks))

    def execute(self, src: np.ndarray, dst: np.ndarray, inverse: bool = False, backend=None) -> np.ndarray:
        """Transform complex ``src`` into preallocated ``dst`` (``src`` is left intact)."""
        if src.shape != self.shape or dst.shape != self.shape:
            raise ValueError(f"lattice shape {src.shape} -> {dst.shape} does not match plan {self.shape}")
        if src is dst or np.shares_memory(src, dst):
            raise ValueError("src and dst must not overlap")
        w = self.workspace
        self._pass(src, dst, 2, inverse, backend)
        self._pass(dst, w, 1, inverse, backend)
        self._pass(w, dst, 0, inverse, backend)
        if inverse:
            dst *= self.real_dtype(1.0 / self.size)
        return dst

    def forward(self, x: np.ndarray, backend=None) -> np.ndarray:
        src = self._as_lattice(x).astype(self.complex_dtype)
        return self.execute(src, np.empty(self.shape, self.complex_dtype), False, backend)

    def inverse(self, s: np.ndarray, backend=None) -> np.ndarray:
        src = self._as_lattice(s).astype(self.complex_dtype)
        return self.execute(src, np.empty(self.shape, self.complex_dtype), True, backend)

    def _as_lattice(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.size != self.size:
            raise ValueError(f"input has {x.size} values, plan {self.dims} needs {self.size}")
        return x.reshape(self.shape)


_PLAN_CACHE: dict = {}


def plan_for(dims: Sequence[int], precision: str = "f64", provider: str = "radix2") -> FftPlan:
    """Return a cached plan; one plan per (dims, precision, provider)."""
    key = (tuple(int(d) for d in dims), precision, provider)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = _PLAN_CACHE[key] = FftPlan(*key)
    return plan


def forward3d(plan: FftPlan, real_field: np.ndarray, backend=None) -> Spectrum:
    x = np.asarray(real_field)
    if np.iscomplexobj(x):
        raise TypeError("forward3d expects a real lattice")
    return Spectrum(plan.dims, plan.forward(x, backend))


def inverse3d(plan: FftPlan, spectrum: Spectrum, backend=None) -> np.ndarray:
    if tuple(spectrum.dims) != plan.dims:
        raise ValueError(f"spectrum dims {spectrum.dims} do not match plan {plan.dims}")
    return plan.inverse(spectrum.data, backend).real.copy()


def fft1d(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Radix-2 transform of a 1D sequence (same conventions as the 3D plan)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    if n < 2 or not is_pow2(n):
        raise UnsupportedSize(f"length must be a power of two >= 2, got {n}")
    plan = _Line(n)
    out = np.take(x, plan.perm[0], mode="clip")
    Radix2Provider()._butterflies(plan, out, 0, inverse, np.empty(n // 2, np.complex128))
    return out / n if inverse else out


class _Line:
    complex_dtype = np.complex128

    def __init__(self, n):
        self.perm = [bit_reverse_permutation(n)]
        self.twiddle = {inv: [_twiddles(n, inv, np.complex128)] for inv in (False, True)}
