"""Standard Problem #3: flower versus vortex in a cube with uniaxial anisotropy.

Lengths are in units of the exchange length ``l_ex = sqrt(2A / (mu0 Ms^2))``
and energies in units of ``Km L^3`` with ``Km = mu0 Ms^2 / 2``. The easy axis
is z. The vortex start curls around x so that its core is perpendicular to
the easy axis; a core along z unwinds into the flower state during
relaxation on coarse grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import SimSpec, build_problem
from .core import MU0, Grid, MaterialParams
from .dynamics import StepperConfig, relax

MS = 8.0e5
A = 1.3e-11
VORTEX_AXIS = (1.0, 0.0, 0.0)


def exchange_length(A: float = A, Ms: float = MS) -> float:
    return math.sqrt(2 * A / (MU0 * Ms * Ms))


def km(Ms: float = MS) -> float:
    return 0.5 * MU0 * Ms * Ms


def sp3_spec(L_over_lex: float, start: str, n: int = 16, dt: float = 1e-13,
             torque_tol: float = 0.01, max_steps: int = 50_000, backend: str = "serial",
             fft_provider: str = "radix2") -> SimSpec:
    """Relaxation problem for a cube of edge ``L_over_lex * l_ex`` on an ``n^3`` grid."""
    if start not in ("flower", "vortex"):
        raise ValueError(f"start must be 'flower' or 'vortex', got {start!r}")
    L = L_over_lex * exchange_length()
    mat = MaterialParams(Ms=MS, A=A, Ku=0.1 * km(), alpha=1.0, easy_axis=(0.0, 0.0, 1.0))
    if start == "flower":
        init = dict(init_kind="uniform", init_direction=(0.0, 0.0, 1.0))
    else:
        init = dict(init_kind="vortex", init_direction=VORTEX_AXIS)
    return SimSpec(grid=Grid.cube(n, L / n), material=mat,
                   stepper=StepperConfig(dt=dt, max_steps=max_steps, torque_tol=torque_tol),
                   backend=backend, fft_provider=fft_provider, sample_every=1000,
                   csv_path=f"sp3_L{L_over_lex:g}_{start}.csv",
                   dump_path=f"sp3_L{L_over_lex:g}_{start}.txt", **init)


@dataclass(frozen=True)
class Sp3Result:
    L_over_lex: float
    start: str
    converged: bool
    steps: int
    reduced_energy: float  # E / (Km L^3)
    m: tuple[float, float, float]


def relax_sp3(spec: SimSpec, L_over_lex: float, start: str) -> Sp3Result:
    state, field, cfg = build_problem(spec)
    try:
        r = relax(state, field, cfg, sample_every=spec.sample_every)
    finally:
        field.backend.close()
    L = spec.grid.nx * spec.grid.dx
    e = r.log[-1].energy.total / (km(spec.material.Ms) * L ** 3)
    return Sp3Result(L_over_lex, start, r.converged, r.steps, e, r.log[-1].m)


def crossover_pair(L_over_lex: float, **kw) -> tuple[Sp3Result, Sp3Result]:
    """Relax the flower and vortex starts at one cube size."""
    return tuple(relax_sp3(sp3_spec(L_over_lex, s, **kw), L_over_lex, s)
                 for s in ("flower", "vortex"))
