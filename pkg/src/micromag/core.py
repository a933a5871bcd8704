"""Domain types shared by the solver: grid geometry, material, fields, state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

MU0 = 4e-7 * math.pi
GAMMA_E = 1.760859630e11  # rad / (s T)

_AXES = {"x": 0, "y": 1, "z": 2}


def as_unit_vector(v: Sequence[float], tol: float = 1e-9, what: str = "vector") -> np.ndarray:
    u = np.asarray(v, dtype=np.float64).reshape(3)
    norm = float(np.sqrt(u @ u))
    if not np.all(np.isfinite(u)) or abs(norm - 1.0) > tol:
        raise ValueError(f"{what} must be a unit 3-vector, got {tuple(u)} (norm {norm:.12g})")
    return u


@dataclass(frozen=True)
class Grid:
    """Box of ``nx*ny*nz`` rectangular cells of size ``dx*dy*dz`` (meters).

    Field arrays are laid out as ``(3, nz, ny, nx)`` so that the flattened
    index of a component lattice is ``i + nx*(j + ny*k)``.
    """

    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("dx", "dy", "dz"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def cube(cls, n: int, d: float) -> "Grid":
        return cls(n, n, n, d, d, d)

    @property
    def n(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def cell(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def shape(self) -> tuple[int, int, int]:
        """Lattice array shape, slowest axis first."""
        return (self.nz, self.ny, self.nx)

    @property
    def cell_count(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    def index(self, i: int, j: int, k: int) -> int:
        if not (0 <= i < self.nx and 0 <= j < self.ny and 0 <= k < self.nz):
            raise IndexError(f"cell ({i}, {j}, {k}) outside grid {self.n}")
        return i + self.nx * (j + self.ny * k)

    def unindex(self, idx: int) -> tuple[int, int, int]:
        if not 0 <= idx < self.cell_count:
            raise IndexError(f"linear index {idx} outside grid of {self.cell_count} cells")
        i = idx % self.nx
        j = (idx // self.nx) % self.ny
        k = idx // (self.nx * self.ny)
        return (i, j, k)

    def centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell-center offsets from the box center, each shaped like a lattice."""
        x = (np.arange(self.nx) - (self.nx - 1) / 2) * self.dx
        y = (np.arange(self.ny) - (self.ny - 1) / 2) * self.dy
        z = (np.arange(self.nz) - (self.nz - 1) / 2) * self.dz
        zz, yy, xx = np.meshgrid(z, y, x, indexing="ij")
        return xx, yy, zz


@dataclass(frozen=True)
class MaterialParams:
    """Single-material parameters in SI units."""

    Ms: float
    A: float = 1.3e-11
    Ku: float = 0.0
    alpha: float = 0.5
    gamma: float = GAMMA_E
    easy_axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.Ms > 0:
            raise ValueError(f"Ms must be positive, got {self.Ms!r}")
        if not self.A >= 0:
            raise ValueError(f"A must be non-negative, got {self.A!r}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not math.isfinite(self.Ku):
            raise ValueError(f"Ku must be finite, got {self.Ku!r}")
        axis = as_unit_vector(self.easy_axis, tol=1e-12, what="easy_axis")
        object.__setattr__(self, "easy_axis", tuple(float(c) for c in axis))

    @property
    def exchange_length(self) -> float:
        return math.sqrt(2 * self.A / (MU0 * self.Ms**2))


class VectorField:
    """Per-cell 3-vector over a grid, stored as three contiguous lattices."""

    __slots__ = ("grid", "data")

    def __init__(self, grid: Grid, data: np.ndarray):
        data = np.asarray(data)
        if data.size != 3 * grid.cell_count:
            raise ValueError(
                f"field data has {data.size} values, grid needs {3 * grid.cell_count}")
        self.grid = grid
        self.data = np.ascontiguousarray(data.reshape((3,) + grid.shape))

    @classmethod
    def zeros(cls, grid: Grid, dtype=np.float64) -> "VectorField":
        return cls(grid, np.zeros((3,) + grid.shape, dtype=dtype))

    @classmethod
    def uniform(cls, grid: Grid, vector: Sequence[float], dtype=np.float64) -> "VectorField":
        data = np.empty((3,) + grid.shape, dtype=dtype)
        for c in range(3):
            data[c] = vector[c]
        return cls(grid, data)

    @property
    def x(self) -> np.ndarray:
        return self.data[0]

    @property
    def y(self) -> np.ndarray:
        return self.data[1]

    @property
    def z(self) -> np.ndarray:
        return self.data[2]

    @property
    def dtype(self):
        return self.data.dtype

    def cell(self, i: int, j: int, k: int) -> np.ndarray:
        self.grid.index(i, j, k)
        return self.data[:, k, j, i].copy()

    def norms(self) -> np.ndarray:
        return np.sqrt(self.data[0] ** 2 + self.data[1] ** 2 + self.data[2] ** 2)

    def flat(self) -> np.ndarray:
        """``(cellCount, 3)`` copy in linear-index order."""
        return self.data.reshape(3, -1).T.copy()

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.data.copy())

    def astype(self, dtype) -> "VectorField":
        return VectorField(self.grid, self.data.astype(dtype))

    def __add__(self, other: "VectorField") -> "VectorField":
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        return VectorField(self.grid, self.data + other.data)

    def __repr__(self):
        return f"VectorField(grid={self.grid.n}, dtype={self.data.dtype})"


@dataclass(frozen=True)
class EnergyBreakdown:
    """Volume-integrated energies in joules."""

    exchange: float = 0.0
    anisotropy: float = 0.0
    demag: float = 0.0
    zeeman: float = 0.0
    total: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        parts = self.exchange + self.anisotropy + self.demag + self.zeeman
        if self.total is None:
            object.__setattr__(self, "total", parts)
        elif not math.isclose(self.total, parts, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError(f"total {self.total!r} != sum of terms {parts!r}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.exchange, self.anisotropy, self.demag, self.zeeman, self.total)


@dataclass(frozen=True)
class SimState:
    M: VectorField
    t: float = 0.0
    step: int = 0
    energy: Optional[EnergyBreakdown] = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("elapsed time must be non-negative")
        if self.step < 0:
            raise ValueError("step counter must be non-negative")

    @property
    def grid(self) -> Grid:
        return self.M.grid

    def evolve(self, **changes) -> "SimState":
        return replace(self, **changes)


def make_uniform_state(grid: Grid, direction: Sequence[float], Ms: float,
                       dtype=np.float64) -> SimState:
    u = as_unit_vector(direction, what="direction")
    if not Ms > 0:
        raise ValueError(f"Ms must be positive, got {Ms!r}")
    return SimState(VectorField.uniform(grid, Ms * u, dtype=dtype))


def parse_axis(axis) -> np.ndarray:
    """Accept ``'+z'``, ``'-x'``, ``'y'`` or a signed coordinate unit vector."""
    if isinstance(axis, str):
        s = axis.strip().lower()
        sign = -1.0 if s.startswith("-") else 1.0
        name = s.lstrip("+-")
        if name not in _AXES:
            raise ValueError(f"unknown axis {axis!r}")
        v = np.zeros(3)
        v[_AXES[name]] = sign
        return v
    v = np.asarray(axis, dtype=np.float64).reshape(3)
    if sorted(np.abs(v).tolist()) != [0.0, 0.0, 1.0]:
        raise ValueError(f"core axis must be one of +-x, +-y, +-z, got {tuple(v)}")
    return v


def make_vortex_state(grid: Grid, core_axis, Ms: float, dtype=np.float64) -> SimState:
    """Vortex circulating around ``core_axis`` through the grid center.

    In-plane direction follows the right-hand rule about the signed axis. Cells
    whose in-plane distance from the axis is within half the in-plane cell
    diagonal form the core and point along the axis.
    """
    a = parse_axis(core_axis)
    if not Ms > 0:
        raise ValueError(f"Ms must be positive, got {Ms!r}")
    ax = int(np.argmax(np.abs(a)))
    perp = [c for c in range(3) if c != ax]
    if any(grid.n[c] < 2 for c in perp):
        raise ValueError(
            f"vortex about axis {'xyz'[ax]} needs >= 2 cells along {'xyz'[perp[0]]} "
            f"and {'xyz'[perp[1]]}, grid is {grid.n}")
    r = list(grid.centers())
    r[ax] = np.zeros_like(r[ax])
    # a x r for a signed unit axis a
    circ = np.stack([
        a[1] * r[2] - a[2] * r[1],
        a[2] * r[0] - a[0] * r[2],
        a[0] * r[1] - a[1] * r[0],
    ])
    rho = np.sqrt(r[0] ** 2 + r[1] ** 2 + r[2] ** 2)
    h = [grid.cell[c] for c in perp]
    core = rho <= 0.5 * math.hypot(*h) * (1 + 1e-12)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = circ / rho
    for c in range(3):
        m[c][core] = a[c]
    return SimState(VectorField(grid, (Ms * m).astype(dtype)))


def reduced_mean(state: SimState, Ms: float) -> np.ndarray:
    data = state.M.data
    return np.array([float(np.mean(data[c], dtype=np.float64)) / Ms for c in range(3)])
