"""Oracle-equivalence and identity checks run by ``micromag selftest``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import MU0, Grid, MaterialParams, VectorField
from .demag import COMPONENTS, DemagPipeline, DemagTensorReal, build_demag_tensor
from .fields import EffectiveField
from .oracle import direct_demag, fd_gradient

MS = 8.0e5
DEMAG_GRIDS = ((4, 4, 4), (5, 3, 2), (8, 8, 1))
TOLERANCE = {"f64": 1e-11, "f32": 1e-3}
TRACE_RATIOS = ((1, 1, 1), (1, 1, 5), (2, 3, 4))
GRADIENT_TOL = 1e-6


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


TensorHook = Optional[Callable[[DemagTensorReal], DemagTensorReal]]


def random_unit_field(grid: Grid, Ms: float = MS, seed: int = 0) -> VectorField:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(3,) + grid.shape)
    v /= np.sqrt((v * v).sum(axis=0))
    return VectorField(grid, Ms * v)


def rel_linf(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def _tensor(grid: Grid, hook: TensorHook) -> DemagTensorReal:
    K = build_demag_tensor(grid)
    return hook(K) if hook is not None else K


def check_demag(n: tuple[int, int, int], precision: str = "f64", hook: TensorHook = None,
                cell: float = 5e-9, seed: int = 0) -> Check:
    grid = Grid(*n, cell, cell, cell)
    M = random_unit_field(grid, seed=seed)
    pipe = DemagPipeline(grid, precision, tensor=_tensor(grid, hook))
    dtype = np.float32 if precision == "f32" else np.float64
    H = pipe(M.data.astype(dtype)).astype(np.float64)
    err = rel_linf(H, direct_demag(M).data)
    tol = TOLERANCE[precision]
    return Check(f"demag {n[0]}x{n[1]}x{n[2]} {precision}", err <= tol,
                 f"rel Linf {err:.2e} (tol {tol:g})")


def self_term(ratio: tuple[float, float, float], hook: TensorHook = None,
              cell: float = 1e-9) -> np.ndarray:
    grid = Grid(1, 1, 1, *(r * cell for r in ratio))
    return _tensor(grid, hook).matrix(0, 0, 0)


def check_trace(ratio, hook: TensorHook = None) -> Check:
    tr = float(np.trace(self_term(ratio, hook)))
    err = abs(tr + 1.0)
    return Check(f"self-term trace {ratio[0]}:{ratio[1]}:{ratio[2]}", err <= 1e-12,
                 f"trace {tr:.15f}")


def check_cubic(hook: TensorHook = None) -> Check:
    K = self_term((1, 1, 1), hook)
    diag = np.diag(K)
    err = float(np.max(np.abs(diag + 1 / 3)))
    off = float(np.max(np.abs(K - np.diag(diag))))
    return Check("cubic self-term -1/3", err <= 1e-12 and off <= 1e-12,
                 f"diag error {err:.1e}, off-diagonal {off:.1e}")


# sign of each component under (x, y, z) -> (sx x, sy y, sz z)
_PARITY = {"xx": (1, 1, 1), "yy": (1, 1, 1), "zz": (1, 1, 1),
           "xy": (-1, -1, 1), "xz": (-1, 1, -1), "yz": (1, -1, -1)}


def parity_violations(K: DemagTensorReal) -> int:
    nx, ny, nz = K.grid.n
    bad = 0
    for X, Y, Z in itertools.product(range(nx), range(ny), range(nz)):
        for name in COMPONENTS:
            ref = K.at(name, X, Y, Z)
            px, py, pz = _PARITY[name]
            for sx, sy, sz in itertools.product((1, -1), repeat=3):
                sign = (px if sx < 0 else 1) * (py if sy < 0 else 1) * (pz if sz < 0 else 1)
                if K.at(name, sx * X, sy * Y, sz * Z) != sign * ref:
                    bad += 1
    return bad


def check_parity(hook: TensorHook = None, n: int = 5) -> Check:
    grid = Grid.cube(n, 1e-9)
    bad = parity_violations(_tensor(grid, hook))
    return Check(f"tensor parity {n}^3", bad == 0, f"{bad} violations")


def gradient_problem(seed: int = 1):
    grid = Grid(3, 3, 3, 2e-9, 3e-9, 2.5e-9)
    u = np.array([1.0, 2.0, 2.0]) / 3.0
    params = MaterialParams(Ms=MS, A=1.3e-11, Ku=4e5, easy_axis=tuple(u))
    field = EffectiveField(grid, params, h_extern=(2e4, -1e4, 3e4))
    return field, random_unit_field(grid, seed=seed)


def gradient_errors(field: EffectiveField, M: VectorField, cells=None) -> np.ndarray:
    """Relative error of every checked component of ``dE/dM`` against ``-mu0 V H_eff``.

    A component whose analytic value is exactly zero is measured against the
    magnitude of that cell's gradient instead.
    """
    grid = field.grid
    H = field.effective(M).data.reshape(3, -1)
    V = grid.cell_volume
    cells = range(grid.cell_count) if cells is None else cells
    errs = []
    for idx in cells:
        scale = MU0 * V * float(np.linalg.norm(H[:, idx]))
        for c in range(3):
            fd = fd_gradient(field.total_energy, M, c, idx)
            an = -MU0 * V * H[c, idx]
            errs.append(abs(fd - an) / (abs(an) if an != 0 else scale))
    return np.array(errs)


def check_gradient(seed: int = 1, cells=(0, 4, 13, 26)) -> Check:
    field, M = gradient_problem(seed)
    err = float(gradient_errors(field, M, cells).max())
    return Check("energy gradient vs -mu0 V H_eff", err <= GRADIENT_TOL,
                 f"max rel error {err:.2e} (tol {GRADIENT_TOL:g})")


def flip_sign(K: DemagTensorReal) -> DemagTensorReal:
    """Fault injection: negate every tensor entry."""
    return DemagTensorReal(K.grid, K.dims, -K.data)


def run_checks(precision: str = "f64", hook: TensorHook = None) -> list[Check]:
    checks = [check_demag(n, precision, hook) for n in DEMAG_GRIDS]
    checks += [check_trace(r, hook) for r in TRACE_RATIOS]
    checks += [check_cubic(hook), check_parity(hook), check_gradient()]
    return checks
