"""Effective-field terms and energy accounting.

All fields are in A/m. With energy density ``e(M)``, each term satisfies
``H = -(1/mu0) de/dM``, which puts ``1/mu0`` into the exchange and anisotropy
prefactors.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .backend import Backend
from .core import MU0, EnergyBreakdown, Grid, MaterialParams, VectorField, as_unit_vector
from .demag import DemagPipeline

TERMS = ("exchange", "anisotropy", "demag", "zeeman")


@dataclass
class FieldTerms:
    exchange: Optional[VectorField] = None
    anisotropy: Optional[VectorField] = None
    demag: Optional[VectorField] = None
    zeeman: Optional[VectorField] = None

    def __post_init__(self):
        grids = {f.grid for f in self.present()}
        if len(grids) > 1:
            raise ValueError("field terms live on different grids")

    def present(self) -> list[VectorField]:
        return [getattr(self, f.name) for f in dc_fields(self) if getattr(self, f.name) is not None]

    def total(self) -> VectorField:
        parts = self.present()
        if not parts:
            raise ValueError("no field terms to sum")
        data = parts[0].data.copy()
        for p in parts[1:]:
            data += p.data
        return VectorField(parts[0].grid, data)


# -- kernels on (3, nz, ny, nx) arrays --------------------------------------

def _neighbors(n: int):
    idx = np.arange(n)
    return np.maximum(idx - 1, 0), np.minimum(idx + 1, n - 1)


def laplacian_kernel(sl: slice, out: np.ndarray, m: np.ndarray, cell: Sequence[float]):
    """Seven-point Laplacian on z-slab ``sl``; a missing neighbor reads the center."""
    dx, dy, dz = cell
    nz, ny, nx = m.shape[1:]
    c = m[:, sl]
    o = out[:, sl]
    lo, hi = _neighbors(nx)
    o[...] = (c[..., lo] - 2 * c + c[..., hi]) * (1.0 / (dx * dx))
    lo, hi = _neighbors(ny)
    o += (c[:, :, lo, :] - 2 * c + c[:, :, hi, :]) * (1.0 / (dy * dy))
    z = np.arange(sl.start, sl.stop)
    o += (m[:, np.maximum(z - 1, 0)] - 2 * c + m[:, np.minimum(z + 1, nz - 1)]) * (1.0 / (dz * dz))


def exchange_kernel(sl, out, m, cell, coef):
    laplacian_kernel(sl, out, m, cell)
    out[:, sl] *= coef


def anisotropy_kernel(sl, out, m, axis, coef):
    c = m[:, sl]
    proj = c[0] * axis[0] + c[1] * axis[1] + c[2] * axis[2]
    for i in range(3):
        np.multiply(proj, coef * axis[i], out=out[i, sl])


# -- public operations ------------------------------------------------------

def _backend(backend: Optional[Backend]) -> Backend:
    return backend if backend is not None else Backend()


def exchange_field(M: VectorField, grid: Grid, A: float, Ms: float,
                   backend: Optional[Backend] = None) -> VectorField:
    if A < 0:
        raise ValueError("exchange constant must be non-negative")
    if M.grid != grid:
        raise ValueError("grid mismatch")
    out = np.empty_like(M.data)
    coef = 2 * A / (MU0 * Ms * Ms)
    _backend(backend).map_cells(exchange_kernel, out, M.data, grid.cell, coef)
    return VectorField(grid, out)


def anisotropy_field(M: VectorField, Ku: float, Ms: float, easy_axis: Sequence[float],
                     backend: Optional[Backend] = None) -> VectorField:
    u = as_unit_vector(easy_axis, tol=1e-12, what="easy_axis")
    out = np.empty_like(M.data)
    coef = 2 * Ku / (MU0 * Ms * Ms)
    _backend(backend).map_cells(anisotropy_kernel, out, M.data, tuple(u), coef)
    return VectorField(M.grid, out)


class EffectiveField:
    """Evaluates the enabled field terms and energies for one problem.

    The demag spectrum and FFT plan are built once at construction. Methods
    taking raw arrays operate on backend-resident ``(3, nz, ny, nx)`` buffers;
    :meth:`__call__` and :meth:`energies` accept :class:`VectorField`.
    """

    def __init__(self, grid: Grid, params: MaterialParams, terms: Iterable[str] = TERMS,
                 h_extern: Union[Sequence[float], VectorField, None] = None,
                 backend: Optional[Backend] = None, precision: str = "f64",
                 fft_provider: str = "radix2", demag: Optional[DemagPipeline] = None):
        self.grid = grid
        self.params = params
        self.terms = tuple(t for t in TERMS if t in set(terms))
        unknown = set(terms) - set(TERMS)
        if unknown:
            raise ValueError(f"unknown field terms {sorted(unknown)}")
        self.backend = _backend(backend)
        self.precision = precision
        self.dtype = np.float32 if precision == "f32" else np.float64
        if isinstance(h_extern, VectorField):
            if h_extern.grid != grid:
                raise ValueError("external field grid mismatch")
            hx = h_extern.data.astype(self.dtype)
        else:
            v = np.zeros(3) if h_extern is None else np.asarray(h_extern, dtype=np.float64)
            hx = VectorField.uniform(grid, v, dtype=self.dtype).data
        self.h_extern = self.backend.upload(hx)
        self.demag = None
        if "demag" in self.terms:
            self.demag = demag if demag is not None else DemagPipeline(
                grid, precision, fft_provider, self.backend)
        self._exch_coef = 2 * params.A / (MU0 * params.Ms ** 2)
        self._anis_coef = 2 * params.Ku / (MU0 * params.Ms ** 2)
        self._axis = tuple(params.easy_axis)

    # array-level API ----------------------------------------------------------

    def compute(self, m: np.ndarray) -> dict:
        """All enabled terms plus ``'total'``; evaluation order demag, exchange, anisotropy, Zeeman."""
        be = self.backend
        out = {}
        if self.demag is not None:
            out["demag"] = self.demag(m)
        with be.timer.phase("local_fields"):
            if "exchange" in self.terms:
                out["exchange"] = be.map_cells(exchange_kernel, np.empty_like(m), m,
                                               self.grid.cell, self._exch_coef)
            if "anisotropy" in self.terms:
                out["anisotropy"] = be.map_cells(anisotropy_kernel, np.empty_like(m), m,
                                                 self._axis, self._anis_coef)
            if "zeeman" in self.terms:
                out["zeeman"] = self.h_extern
            parts = [out[t] for t in self.terms]
            if parts:
                total = parts[0].copy()
                for p in parts[1:]:
                    total += p
            else:
                total = np.zeros_like(m)
        out["total"] = total
        return out

    def energy_of(self, m: np.ndarray, fields: dict) -> EnergyBreakdown:
        be = self.backend
        V = self.grid.cell_volume
        Ms = self.params.Ms

        def dot(a, b):
            return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]

        e = {}
        if "exchange" in fields:
            # equals the nearest-neighbour sum A * |grad m|^2 for this stencil
            e["exchange"] = -0.5 * MU0 * V * be.reduce_cells(dot(fields["exchange"], m))
        if "anisotropy" in self.terms:
            u = self._axis
            proj = (m[0] * u[0] + m[1] * u[1] + m[2] * u[2]) / Ms
            e["anisotropy"] = self.params.Ku * V * be.reduce_cells(1.0 - proj * proj)
        if "demag" in fields:
            e["demag"] = -0.5 * MU0 * V * be.reduce_cells(dot(fields["demag"], m))
        if "zeeman" in fields:
            e["zeeman"] = -MU0 * V * be.reduce_cells(dot(fields["zeeman"], m))
        return EnergyBreakdown(**e)

    # field-level API ----------------------------------------------------------

    def __call__(self, M: VectorField) -> FieldTerms:
        f = self.compute(self._check(M))
        return FieldTerms(**{k: VectorField(self.grid, v) for k, v in f.items() if k != "total"})

    def effective(self, M: VectorField) -> VectorField:
        return VectorField(self.grid, self.compute(self._check(M))["total"])

    def energies(self, M: VectorField) -> EnergyBreakdown:
        m = self._check(M)
        return self.energy_of(m, self.compute(m))

    def total_energy(self, M: VectorField) -> float:
        return self.energies(M).total

    def _check(self, M: VectorField) -> np.ndarray:
        if M.grid != self.grid:
            raise ValueError(f"field grid {M.grid.n} does not match problem grid {self.grid.n}")
        return M.data.astype(self.dtype, copy=False)


def effective_field(M: VectorField, terms: Union[EffectiveField, Iterable[str]] = (),
                    h_extern: Union[Sequence[float], VectorField, None] = None,
                    params: Optional[MaterialParams] = None) -> VectorField:
    """Sum of the enabled terms.

    ``terms`` is either a configured :class:`EffectiveField` or a collection of
    term names, in which case ``params`` is required unless only ``zeeman`` is
    enabled.
    """
    if isinstance(terms, EffectiveField):
        return terms.effective(M)
    names = set(terms)
    if h_extern is not None:
        names.add("zeeman")
    if not names:
        return VectorField.zeros(M.grid, dtype=M.dtype)
    params = params or MaterialParams(Ms=max(float(M.norms().max()), 1.0))
    return EffectiveField(M.grid, params, names, h_extern).effective(M)


def energies(M: VectorField, H_demag: Optional[VectorField], H_extern, params: MaterialParams,
             grid: Optional[Grid] = None) -> EnergyBreakdown:
    """Energy of each term from already-computed demag and external fields."""
    grid = grid or M.grid
    V = grid.cell_volume
    m = M.data.astype(np.float64)
    H_ex = exchange_field(M, grid, params.A, params.Ms).data
    u = np.asarray(params.easy_axis)
    proj = np.einsum("c...,c->...", m, u) / params.Ms
    e_exch = -0.5 * MU0 * V * float(np.sum(H_ex * m))
    e_anis = params.Ku * V * float(np.sum(1.0 - proj * proj))
    e_demag = 0.0
    if H_demag is not None:
        e_demag = -0.5 * MU0 * V * float(np.sum(H_demag.data * m))
    e_zee = 0.0
    if H_extern is not None:
        hx = H_extern.data if isinstance(H_extern, VectorField) else \
            np.asarray(H_extern, dtype=np.float64).reshape(3, 1, 1, 1)
        e_zee = -MU0 * V * float(np.sum(hx * m))
    return EnergyBreakdown(exchange=e_exch, anisotropy=e_anis, demag=e_demag, zeeman=e_zee)
