"""Brute-force reference implementations.

Nothing here touches the padded layout, the FFT plans or the stencil kernels
used by the solver; the tensor is re-evaluated per displacement from the
Newell kernels and accumulated in extended precision. These are correctness
anchors for tests and ``selftest``, not performance paths.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Optional, Sequence

import numpy as np

from .core import MU0, Grid, SimState, VectorField
from .demag import newell_f, newell_g
from .fft import Spectrum

DIRECT_DEMAG_CAP = 12 ** 3
NAIVE_DFT_CAP = 4096

_LD = np.longdouble


class OracleCapExceeded(ValueError):
    pass


def tensor_table(grid: Grid) -> np.ndarray:
    """All six tensor components for every displacement in ``[-(n-1), n-1]``.

    Shape ``(3, 3, 2nz-1, 2ny-1, 2nx-1)`` in longdouble, indexed by
    ``[a, b, Z + nz - 1, Y + ny - 1, X + nx - 1]``.
    """
    nx, ny, nz = grid.n
    scale = max(grid.cell)
    dx, dy, dz = (_LD(c) / _LD(scale) for c in grid.cell)
    Z, Y, X = np.meshgrid(np.arange(-(nz - 1), nz, dtype=_LD),
                          np.arange(-(ny - 1), ny, dtype=_LD),
                          np.arange(-(nx - 1), nx, dtype=_LD), indexing="ij")
    weight = {-1: -1, 0: 2, 1: -1}
    acc = {key: np.zeros(X.shape, dtype=_LD) for key in ("xx", "yy", "zz", "xy", "xz", "yz")}
    for a, b, c in itertools.product((-1, 0, 1), repeat=3):
        w = weight[a] * weight[b] * weight[c]
        x, y, z = (X + a) * dx, (Y + b) * dy, (Z + c) * dz
        acc["xx"] += w * newell_f(x, y, z)
        acc["yy"] += w * newell_f(y, z, x)
        acc["zz"] += w * newell_f(z, x, y)
        acc["xy"] += w * newell_g(x, y, z)
        acc["xz"] += w * newell_g(x, z, y)
        acc["yz"] += w * newell_g(y, z, x)
    coef = _LD(-1) / (4 * _LD(math.pi) * dx * dy * dz)
    table = np.empty((3, 3) + X.shape, dtype=_LD)
    for key, (p, q) in {"xx": (0, 0), "yy": (1, 1), "zz": (2, 2),
                        "xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}.items():
        table[p, q] = table[q, p] = coef * acc[key]
    return table


def direct_demag(M: VectorField, grid: Optional[Grid] = None, cap: int = DIRECT_DEMAG_CAP,
                 table: Optional[np.ndarray] = None) -> VectorField:
    """``H_a(i,j,k) = sum_{l,m,n} sum_b M_b(l,m,n) K_ab(l-i, m-j, n-k)`` by direct summation."""
    grid = grid or M.grid
    if grid != M.grid:
        raise ValueError("grid mismatch")
    if grid.cell_count > cap:
        raise OracleCapExceeded(f"{grid.cell_count} cells exceeds direct-sum cap of {cap}")
    if table is None:
        table = tensor_table(grid)
    nx, ny, nz = grid.n
    m = M.data.astype(_LD)
    H = np.empty((3, nz, ny, nx), dtype=np.float64)
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                K = table[:, :, nz - 1 - k:2 * nz - 1 - k, ny - 1 - j:2 * ny - 1 - j,
                          nx - 1 - i:2 * nx - 1 - i]
                for a in range(3):
                    s = _LD(0)
                    for b in range(3):
                        s += np.sum(K[a, b] * m[b], dtype=_LD)
                    H[a, k, j, i] = s
    return VectorField(grid, H)


def direct_convolve_1d(m: Sequence[float], kernel: Sequence[float]) -> np.ndarray:
    """``H(i) = sum_l M(l) K(i - l)`` as a literal double loop.

    ``kernel[d + n - 1]`` holds ``K(d)``.
    """
    m = list(m)
    n = len(m)
    if len(kernel) != 2 * n - 1:
        raise ValueError(f"kernel needs {2 * n - 1} values for {n} cells, got {len(kernel)}")
    out = np.zeros(n)
    for i in range(n):
        s = _LD(0)
        for l in range(n):
            s += _LD(m[l]) * _LD(kernel[i - l + n - 1])
        out[i] = s
    return out


def naive_dft3d(x: np.ndarray) -> Spectrum:
    """Unnormalized DFT of a ``(Pz, Py, Px)`` real lattice by direct summation."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError("expected a 3D lattice")
    if x.size > NAIVE_DFT_CAP:
        raise OracleCapExceeded(f"lattice of {x.size} values exceeds cap of {NAIVE_DFT_CAP}")
    Pz, Py, Px = x.shape
    n, m, l = np.meshgrid(np.arange(Pz), np.arange(Py), np.arange(Px), indexing="ij")
    xs = x.astype(_LD)
    out = np.empty(x.shape, dtype=np.complex128)
    for w in range(Pz):
        for v in range(Py):
            for u in range(Px):
                # reduce the integer phase first so the angle stays accurate
                frac = (_LD((u * l) % Px) / Px + _LD((v * m) % Py) / Py
                        + _LD((w * n) % Pz) / Pz)
                ang = -2 * _LD(math.pi) * frac
                re = np.sum(xs * np.cos(ang), dtype=_LD)
                im = np.sum(xs * np.sin(ang), dtype=_LD)
                out[w, v, u] = complex(float(re), float(im))
    return Spectrum((Px, Py, Pz), out)


def direct_exchange(M: VectorField, A: float, Ms: float) -> VectorField:
    """Seven-point Laplacian with mirrored (zero-flux) boundaries, cell by cell."""
    g = M.grid
    coef = 2 * A / (MU0 * Ms * Ms)
    H = np.zeros_like(M.data, dtype=np.float64)
    for k in range(g.nz):
        for j in range(g.ny):
            for i in range(g.nx):
                for c in range(3):
                    mc = M.data[c]
                    center = mc[k, j, i]
                    total = 0.0
                    for (di, dj, dk), h in (((1, 0, 0), g.dx), ((0, 1, 0), g.dy), ((0, 0, 1), g.dz)):
                        for s in (-1, 1):
                            ii, jj, kk = i + s * di, j + s * dj, k + s * dk
                            inside = 0 <= ii < g.nx and 0 <= jj < g.ny and 0 <= kk < g.nz
                            nb = mc[kk, jj, ii] if inside else center
                            total += (nb - center) / (h * h)
                    H[c, k, j, i] = coef * total
    return VectorField(g, H)


def fd_gradient(energy_fn: Callable[[VectorField], float], state, component: int,
                cell_index: int, h: Optional[float] = None) -> float:
    """Central difference ``dE/dM_c`` at one cell, without renormalizing.

    ``state`` may be a :class:`SimState` or a :class:`VectorField`; ``h``
    defaults to ``1e-3`` times the largest cell magnitude.
    """
    M = state.M if isinstance(state, SimState) else state
    if h is None:
        h = 1e-3 * float(M.norms().max())
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    i, j, k = M.grid.unindex(cell_index)
    plus = M.copy()
    minus = M.copy()
    plus.data[component, k, j, i] += h
    minus.data[component, k, j, i] -= h
    return (energy_fn(plus) - energy_fn(minus)) / (2 * h)
