"""LLG dynamics: right-hand side, explicit Euler stepping and relaxation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import MU0, EnergyBreakdown, Grid, MaterialParams, SimState, VectorField
from .fields import EffectiveField

log = logging.getLogger(__name__)

RAD_PER_S_TO_DEG_PER_NS = 180.0 / math.pi * 1e-9


class IntegrationError(FloatingPointError):
    """Raised when a step produces non-finite magnetization."""


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-14
    renormalize_every: int = 1
    max_steps: int = 100_000
    torque_tol: float = 0.01  # degrees per nanosecond

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.renormalize_every) != self.renormalize_every or self.renormalize_every < 1:
            raise ValueError("renormalize_every must be an integer >= 1")
        if int(self.max_steps) != self.max_steps or self.max_steps < 0:
            raise ValueError("max_steps must be a non-negative integer")
        if not self.torque_tol > 0:
            raise ValueError("torque_tol must be positive")


def stable_dt(grid: Grid, params: MaterialParams, safety: float = 10.0) -> float:
    """Heuristic explicit-Euler limit from the fastest exchange mode.

    ``(1 + alpha^2) Ms min(d)^2 / (4 gamma A safety)``; infinite without exchange.
    """
    if params.A == 0:
        return math.inf
    d = min(grid.cell)
    return (1 + params.alpha ** 2) * params.Ms * d * d / (4 * params.gamma * params.A * safety)


_NEXT = np.array([1, 2, 0])
_PREV = np.array([2, 0, 1])


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # component-rolled cross product: fewer numpy calls than per-component
    out = a[_NEXT] * b[_PREV]
    out -= a[_PREV] * b[_NEXT]
    return out


def llg_rhs_array(m: np.ndarray, h: np.ndarray, params: MaterialParams,
                  out: Optional[np.ndarray] = None) -> np.ndarray:
    a = params.alpha
    g = params.gamma / (1 + a * a)
    gd = a * g / params.Ms
    p = _cross(m, h)
    q = _cross(m, p) if gd else None
    if out is None:
        out = np.empty_like(m)
    np.multiply(p, -g * MU0, out=out)
    if q is not None:
        q *= gd * MU0
        out -= q
    return out


def llg_rhs(M: VectorField, Heff: VectorField, params: MaterialParams) -> VectorField:
    """``dM/dt`` in A/(m s) for every cell."""
    if M.grid != Heff.grid:
        raise ValueError("grid mismatch between M and H_eff")
    return VectorField(M.grid, llg_rhs_array(M.data, Heff.data, params))


def _max_rate(dmdt: np.ndarray, Ms: float, reduce: Callable) -> float:
    sq = dmdt[0] * dmdt[0] + dmdt[1] * dmdt[1] + dmdt[2] * dmdt[2]
    return math.sqrt(reduce(sq, "max")) / Ms * RAD_PER_S_TO_DEG_PER_NS


def max_torque_rate(state, Heff: VectorField, params: MaterialParams) -> float:
    """Largest ``|dm/dt|`` over cells in degrees per nanosecond."""
    M = state.M if isinstance(state, SimState) else state
    dmdt = llg_rhs_array(M.data, Heff.data, params)
    return _max_rate(dmdt, params.Ms, lambda a, op: float(np.max(a)))


@dataclass(frozen=True)
class Sample:
    step: int
    t: float
    m: tuple[float, float, float]
    energy: EnergyBreakdown
    max_torque: float


class Integrator:
    """Explicit Euler stepper holding the magnetization in backend storage.

    Field data crosses the backend boundary in :meth:`load` and
    :meth:`snapshot` only; sampling uses on-backend reductions.
    """

    def __init__(self, field: EffectiveField, config: StepperConfig):
        self.field = field
        self.config = config
        self.params = field.params
        self.backend = field.backend
        self.m: Optional[np.ndarray] = None
        self.t = 0.0
        self.step_count = 0
        self._fields = None
        self._rhs = None
        limit = stable_dt(field.grid, field.params)
        if config.dt > limit:
            log.warning("dt = %.3g s exceeds the stability heuristic %.3g s", config.dt, limit)

    def load(self, state: SimState):
        if state.grid != self.field.grid:
            raise ValueError("state grid does not match the field problem")
        self.m = self.backend.upload(state.M.data.astype(self.field.dtype))
        self.t = state.t
        self.step_count = state.step
        self._evaluate()

    def _evaluate(self):
        self._fields = self.field.compute(self.m)
        with self.backend.timer.phase("integrate"):
            self._rhs = llg_rhs_array(self.m, self._fields["total"], self.params, self._rhs)

    @property
    def fields(self) -> dict:
        return self._fields

    def torque_rate(self) -> float:
        return _max_rate(self._rhs, self.params.Ms, self.backend.reduce_cells)

    def step(self):
        cfg = self.config
        m = self.m
        with self.backend.timer.phase("integrate"):
            self.backend.map_cells(_euler_kernel, m, self._rhs, cfg.dt)
            self.step_count += 1
            self.t += cfg.dt
            if self.step_count % cfg.renormalize_every == 0:
                self.backend.map_cells(_renormalize_kernel, m, self.params.Ms)
            if not np.isfinite(m).all():
                raise IntegrationError(
                    f"non-finite magnetization at step {self.step_count} (t = {self.t:.6g} s); "
                    f"dt = {cfg.dt:.3g} s is likely too large "
                    f"(heuristic limit {stable_dt(self.field.grid, self.params):.3g} s)")
        self._evaluate()

    def energy(self) -> EnergyBreakdown:
        return self.field.energy_of(self.m, self._fields)

    def reduced_mean(self) -> tuple[float, float, float]:
        n = self.field.grid.cell_count
        Ms = self.params.Ms
        return tuple(self.backend.reduce_cells(self.m[c]) / n / Ms for c in range(3))

    def sample(self) -> Sample:
        return Sample(self.step_count, self.t, self.reduced_mean(), self.energy(), self.torque_rate())

    def snapshot(self) -> SimState:
        data = self.backend.download(self.m)
        return SimState(VectorField(self.field.grid, data), self.t, self.step_count, self.energy())


def _euler_kernel(sl, m, rhs, dt):
    m[:, sl] += dt * rhs[:, sl]


def _renormalize_kernel(sl, m, Ms):
    c = m[:, sl]
    c *= Ms / np.sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])


def euler_step(state: SimState, field: EffectiveField, config: StepperConfig) -> SimState:
    """One Euler step; renormalizes when the new step count is a multiple of ``renormalize_every``."""
    integ = Integrator(field, config)
    integ.load(state)
    integ.step()
    return integ.snapshot()


@dataclass
class RelaxResult:
    state: SimState
    log: list[Sample] = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    snapshots: list[SimState] = field(default_factory=list)


def _drive(integ: Integrator, steps: Optional[int], tol: Optional[float], sample_every: int,
           on_sample: Optional[Callable[[Sample], None]], snapshot_every_sample: bool):
    samples: list[Sample] = []
    snapshots: list[SimState] = []

    def record():
        s = integ.sample()
        samples.append(s)
        if on_sample is not None:
            on_sample(s)
        if snapshot_every_sample:
            snapshots.append(integ.snapshot())

    record()
    done = 0
    converged = tol is not None and integ.torque_rate() <= tol
    while not converged and (steps is None or done < steps):
        integ.step()
        done += 1
        if tol is not None and integ.torque_rate() <= tol:
            converged = True
        elif sample_every and done % sample_every == 0:
            record()
    if samples[-1].step != integ.step_count:
        record()
    return samples, snapshots, converged, done


def relax(state: SimState, field: EffectiveField, config: StepperConfig, sample_every: int = 100,
          on_sample: Optional[Callable[[Sample], None]] = None,
          snapshot_every_sample: bool = False) -> RelaxResult:
    """Step until the torque criterion holds or ``config.max_steps`` is reached."""
    integ = Integrator(field, config)
    integ.load(state)
    samples, snaps, converged, done = _drive(integ, config.max_steps, config.torque_tol,
                                             sample_every, on_sample, snapshot_every_sample)
    return RelaxResult(integ.snapshot(), samples, converged, done, snaps)


def run(state: SimState, field: EffectiveField, config: StepperConfig, steps: int,
        sample_every: int = 100, on_sample: Optional[Callable[[Sample], None]] = None) -> RelaxResult:
    """Exactly ``steps`` Euler steps regardless of torque."""
    integ = Integrator(field, config)
    integ.load(state)
    samples, _, _, done = _drive(integ, steps, None, sample_every, on_sample, False)
    final = integ.snapshot()
    return RelaxResult(final, samples, False, done)
