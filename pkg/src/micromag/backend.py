"""Execution backends: serial reference and chunked data-parallel.

All data-parallel work in the package goes through :meth:`Backend.run_tasks`,
:meth:`Backend.map_cells` and :meth:`Backend.reduce_cells`. Chunk shapes depend
only on problem size, never on the thread count, so results are reproducible
for any ``threads`` setting.
"""

from __future__ import annotations

import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

PHASES = ("pad", "forward_fft", "spectral_multiply", "inverse_fft", "local_fields", "integrate")

# cells per reduction leaf on the parallel backend
REDUCE_BLOCK = 4096
# target cells per map_cells chunk on the parallel backend
MAP_CHUNK_CELLS = 8192


@dataclass
class StepTiming:
    """Wall-clock seconds spent in each phase of one step."""

    pad: float = 0.0
    forward_fft: float = 0.0
    spectral_multiply: float = 0.0
    inverse_fft: float = 0.0
    local_fields: float = 0.0
    integrate: float = 0.0
    total: float = 0.0

    def phase_sum(self) -> float:
        return sum(getattr(self, p) for p in PHASES)

    def scaled(self, factor: float) -> "StepTiming":
        return StepTiming(**{k: v * factor for k, v in self.__dict__.items()})


class _NullPhase:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


_NULL_PHASE = _NullPhase()


class PhaseTimer:
    """Accumulates per-phase wall time while enabled; near-free when disabled."""

    def __init__(self, clock: Callable[[], float] = time.perf_counter):
        self.clock = clock
        self.enabled = False
        self.acc = dict.fromkeys(PHASES, 0.0)

    def reset(self):
        self.acc = dict.fromkeys(PHASES, 0.0)

    def phase(self, name: str):
        if not self.enabled:
            return _NULL_PHASE
        return self._timed(name)

    @contextmanager
    def _timed(self, name: str) -> Iterator[None]:
        t0 = self.clock()
        try:
            yield
        finally:
            self.acc[name] += self.clock() - t0


@dataclass
class TransferLog:
    uploads: int = 0
    downloads: int = 0
    bytes_up: int = 0
    bytes_down: int = 0


def _chunks(n: int, parts: int) -> list[slice]:
    parts = max(1, min(n, parts))
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


class Backend:
    """Serial reference backend. Subclasses change how tasks are scheduled."""

    kind = "serial"

    def __init__(self, threads: Optional[int] = None):
        self.threads = 1
        self.timer = PhaseTimer()
        self.transfers = TransferLog()

    # residency ---------------------------------------------------------

    def upload(self, host: np.ndarray) -> np.ndarray:
        """Copy host data into backend-owned storage."""
        dev = np.array(host, copy=True, order="C")
        self.transfers.uploads += 1
        self.transfers.bytes_up += dev.nbytes
        return dev

    def download(self, dev: np.ndarray) -> np.ndarray:
        host = np.array(dev, copy=True)
        self.transfers.downloads += 1
        self.transfers.bytes_down += host.nbytes
        return host

    # scheduling --------------------------------------------------------

    def split(self, n: int, cells_per_unit: int = 1) -> list[slice]:
        """Partition ``range(n)`` into work chunks."""
        return [slice(0, n)]

    def run_tasks(self, fn: Callable[[int], None], count: int) -> None:
        for i in range(count):
            fn(i)

    def map_cells(self, kernel: Callable, out: np.ndarray, *inputs) -> np.ndarray:
        """Apply ``kernel(zslice, out, *inputs)`` over z-slabs of a ``(3, nz, ny, nx)`` field.

        The kernel must write only ``out[:, zslice]`` and may read any part of
        the inputs.
        """
        if out.ndim != 4 or out.shape[0] != 3:
            raise ValueError(f"map_cells expects a (3, nz, ny, nx) output, got {out.shape}")
        for a in inputs:
            if isinstance(a, np.ndarray) and a.ndim == 4 and a.shape != out.shape:
                raise ValueError(f"input shape {a.shape} does not match output {out.shape}")
        nz, ny, nx = out.shape[1:]
        slabs = self.split(nz, ny * nx)
        if len(slabs) == 1:
            kernel(slabs[0], out, *inputs)
        else:
            self.run_tasks(lambda t: kernel(slabs[t], out, *inputs), len(slabs))
        return out

    def reduce_cells(self, values: np.ndarray, op: str = "sum") -> float:
        v = np.asarray(values).ravel()
        if v.size == 0:
            raise ValueError("cannot reduce an empty field")
        if op == "max":
            return float(np.max(v))
        if op != "sum":
            raise ValueError(f"unknown reduction {op!r}")
        # cumulative sum is a strictly left-to-right accumulation
        return float(np.cumsum(v, dtype=np.float64)[-1])

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ParallelBackend(Backend):
    """Thread-pool backend; numpy kernels release the GIL on large slabs."""

    kind = "parallel"

    def __init__(self, threads: Optional[int] = None):
        super().__init__()
        self.threads = int(threads or os.cpu_count() or 1)
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self._pool: Optional[ThreadPoolExecutor] = None

    @property
    def pool(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.threads,
                                            thread_name_prefix="micromag")
        return self._pool

    def split(self, n: int, cells_per_unit: int = 1) -> list[slice]:
        parts = -(-n * cells_per_unit // MAP_CHUNK_CELLS)
        return _chunks(n, parts)

    def run_tasks(self, fn: Callable[[int], None], count: int) -> None:
        if count <= 1 or self.threads == 1:
            for i in range(count):
                fn(i)
            return
        for f in [self.pool.submit(fn, i) for i in range(count)]:
            f.result()

    def reduce_cells(self, values: np.ndarray, op: str = "sum") -> float:
        v = np.asarray(values).ravel()
        if v.size == 0:
            raise ValueError("cannot reduce an empty field")
        if op == "max":
            return float(np.max(v))
        if op != "sum":
            raise ValueError(f"unknown reduction {op!r}")
        nblocks = -(-v.size // REDUCE_BLOCK)
        partial = np.empty(nblocks, dtype=np.float64)

        def leaf(b):
            partial[b] = np.sum(v[b * REDUCE_BLOCK:(b + 1) * REDUCE_BLOCK], dtype=np.float64)

        self.run_tasks(leaf, nblocks)
        # fixed-shape binary tree over the leaves
        while partial.size > 1:
            if partial.size % 2:
                partial = np.append(partial, 0.0)
            partial = partial[0::2] + partial[1::2]
        return float(partial[0])

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None


def make_backend(kind: str = "serial", threads: Optional[int] = None) -> Backend:
    if kind == "serial":
        return Backend()
    if kind == "parallel":
        return ParallelBackend(threads)
    raise ValueError(f"unknown backend kind {kind!r} (expected 'serial' or 'parallel')")


def time_step(step_fn: Callable[[], None], backend: Backend,
              clock: Callable[[], float] = time.perf_counter) -> StepTiming:
    """Run ``step_fn`` once and report wall time per phase and in total."""
    timer = backend.timer
    timer.clock = clock
    timer.reset()
    was = timer.enabled
    timer.enabled = True
    try:
        t0 = clock()
        step_fn()
        total = clock() - t0
    finally:
        timer.enabled = was
    return StepTiming(total=total, **timer.acc)


@dataclass
class BenchResult:
    samples: list[StepTiming] = field(default_factory=list)

    @property
    def median(self) -> StepTiming:
        keys = list(StepTiming().__dict__)
        return StepTiming(**{k: statistics.median(getattr(s, k) for s in self.samples)
                             for k in keys})


def benchmark_steps(step_fn: Callable[[], None], backend: Backend,
                    warmup: int = 3, repeats: int = 20) -> BenchResult:
    """Discard ``warmup`` steps, then time ``repeats`` steps individually."""
    for _ in range(warmup):
        step_fn()
    res = BenchResult()
    for _ in range(repeats):
        res.samples.append(time_step(step_fn, backend))
    return res
