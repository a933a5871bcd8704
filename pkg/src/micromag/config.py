"""Plain-text problem configuration, trajectory CSV and field dumps.

Config files hold one ``key = value`` per line with ``#`` comments. Vectors
are written as comma-separated triples.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import Grid, MaterialParams, SimState, VectorField, as_unit_vector, make_uniform_state, \
    make_vortex_state, parse_axis
from .backend import make_backend
from .dynamics import Sample, StepperConfig
from .fields import TERMS, EffectiveField

log = logging.getLogger(__name__)

INIT_KINDS = ("uniform", "vortex")
PRECISIONS = ("f32", "f64")
BACKENDS = ("serial", "parallel")
FFT_PROVIDERS = ("radix2", "numpy")

CSV_COLUMNS = ("step", "t_s", "mx", "my", "mz", "E_exch_J", "E_anis_J", "E_demag_J",
               "E_zeeman_J", "E_total_J", "max_torque_deg_per_ns")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimSpec:
    grid: Grid
    material: MaterialParams
    terms: tuple[str, ...] = TERMS
    h_extern: tuple[float, float, float] = (0.0, 0.0, 0.0)
    init_kind: str = "uniform"
    init_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    backend: str = "serial"
    threads: Optional[int] = None
    precision: str = "f64"
    fft_provider: str = "radix2"
    csv_path: str = "trajectory.csv"
    dump_path: str = "final_field.txt"
    sample_every: int = 100

    def __post_init__(self):
        if self.init_kind not in INIT_KINDS:
            raise ValueError(f"init.kind must be one of {INIT_KINDS}, got {self.init_kind!r}")
        if self.init_kind == "vortex":
            parse_axis(self.init_direction)
        else:
            as_unit_vector(self.init_direction, what="init.direction")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend.kind must be one of {BACKENDS}, got {self.backend!r}")
        if self.threads is not None and self.threads < 1:
            raise ValueError("backend.threads must be >= 1")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if self.fft_provider not in FFT_PROVIDERS:
            raise ValueError(f"fft.provider must be one of {FFT_PROVIDERS}")
        bad = set(self.terms) - set(TERMS)
        if bad:
            raise ValueError(f"unknown field terms {sorted(bad)}")
        if self.sample_every < 1:
            raise ValueError("output.sample_every must be >= 1")

    def initial_state(self) -> SimState:
        dtype = np.float32 if self.precision == "f32" else np.float64
        if self.init_kind == "vortex":
            return make_vortex_state(self.grid, self.init_direction, self.material.Ms, dtype)
        return make_uniform_state(self.grid, self.init_direction, self.material.Ms, dtype)


def build_problem(spec: SimSpec) -> tuple[SimState, EffectiveField, StepperConfig]:
    """Initial state, configured field evaluator and stepper settings for ``spec``."""
    backend = make_backend(spec.backend, spec.threads)
    field = EffectiveField(spec.grid, spec.material, spec.terms, spec.h_extern, backend,
                           spec.precision, spec.fft_provider)
    return spec.initial_state(), field, spec.stepper


# -- value codecs -------------------------------------------------------------

def _pos_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise ValueError("must be a non-negative integer")
    return v


def _pos_float(s: str) -> float:
    v = float(s)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError("must be a positive number")
    return v


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _vec(s: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(_float(p) for p in parts)


def _axis_or_vec(s: str) -> tuple[float, float, float]:
    if "," in s:
        return _vec(s)
    return tuple(float(c) for c in parse_axis(s))


def _names(s: str) -> tuple[str, ...]:
    names = tuple(p.strip() for p in s.split(",") if p.strip())
    return tuple(t for t in TERMS if t in names) if set(names) <= set(TERMS) else names


def _choice(options: Sequence[str]) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _optional_threads(s: str) -> Optional[int]:
    return None if s == "auto" else _pos_int(s)


def _text(s: str) -> str:
    if not s:
        raise ValueError("must not be empty")
    return s


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class _Key:
    name: str
    parse: Callable[[str], object]
    default: object = None
    required: bool = False


_D = SimSpec.__dataclass_fields__
_M = MaterialParams.__dataclass_fields__
_S = StepperConfig.__dataclass_fields__

KEYS = (
    _Key("grid.nx", _pos_int, required=True),
    _Key("grid.ny", _pos_int, required=True),
    _Key("grid.nz", _pos_int, required=True),
    _Key("grid.dx", _pos_float, required=True),
    _Key("grid.dy", _pos_float, required=True),
    _Key("grid.dz", _pos_float, required=True),
    _Key("material.Ms", _pos_float, required=True),
    _Key("material.A", _float, _M["A"].default),
    _Key("material.Ku", _float, _M["Ku"].default),
    _Key("material.alpha", _float, _M["alpha"].default),
    _Key("material.gamma", _pos_float, _M["gamma"].default),
    _Key("material.easy_axis", _vec, _M["easy_axis"].default),
    _Key("field.terms", _names, TERMS),
    _Key("field.extern", _vec, _D["h_extern"].default),
    _Key("init.kind", _choice(INIT_KINDS), _D["init_kind"].default),
    _Key("init.direction", _axis_or_vec, _D["init_direction"].default),
    _Key("stepper.dt", _pos_float, _S["dt"].default),
    _Key("stepper.max_steps", _nonneg_int, _S["max_steps"].default),
    _Key("stepper.torque_tol", _pos_float, _S["torque_tol"].default),
    _Key("stepper.renormalize_every", _pos_int, _S["renormalize_every"].default),
    _Key("backend.kind", _choice(BACKENDS), _D["backend"].default),
    _Key("backend.threads", _optional_threads, None),
    _Key("precision", _choice(PRECISIONS), _D["precision"].default),
    _Key("fft.provider", _choice(FFT_PROVIDERS), _D["fft_provider"].default),
    _Key("output.csv", _text, _D["csv_path"].default),
    _Key("output.dump", _text, _D["dump_path"].default),
    _Key("output.sample_every", _pos_int, _D["sample_every"].default),
)
_BY_NAME = {k.name: k for k in KEYS}


def _build(v: dict) -> SimSpec:
    grid = Grid(v["grid.nx"], v["grid.ny"], v["grid.nz"], v["grid.dx"], v["grid.dy"], v["grid.dz"])
    mat = MaterialParams(Ms=v["material.Ms"], A=v["material.A"], Ku=v["material.Ku"],
                         alpha=v["material.alpha"], gamma=v["material.gamma"],
                         easy_axis=tuple(as_unit_vector(v["material.easy_axis"], what="easy_axis")))
    step = StepperConfig(dt=v["stepper.dt"], renormalize_every=v["stepper.renormalize_every"],
                         max_steps=v["stepper.max_steps"], torque_tol=v["stepper.torque_tol"])
    return SimSpec(grid=grid, material=mat, terms=v["field.terms"], h_extern=v["field.extern"],
                   init_kind=v["init.kind"], init_direction=v["init.direction"], stepper=step,
                   backend=v["backend.kind"], threads=v["backend.threads"],
                   precision=v["precision"], fft_provider=v["fft.provider"],
                   csv_path=v["output.csv"], dump_path=v["output.dump"],
                   sample_every=v["output.sample_every"])


def parse_config(text: str, source: str = "<config>") -> SimSpec:
    """Parse and validate a config; each omitted optional key is logged with its default."""
    values: dict = {}
    where: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        loc = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{loc}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        spec = _BY_NAME.get(key)
        if spec is None:
            raise ConfigError(f"{loc}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{loc}: duplicate key {key!r} (first set on line {where[key]})")
        try:
            values[key] = spec.parse(value)
        except ValueError as e:
            raise ConfigError(f"{loc}: bad value for {key}: {value!r} ({e})") from None
        where[key] = lineno
    missing = [k.name for k in KEYS if k.required and k.name not in values]
    if missing:
        raise ConfigError(f"{source}: missing required key(s) {', '.join(missing)}")
    for k in KEYS:
        if k.name not in values:
            values[k.name] = k.default
            log.info("default applied: %s = %s", k.name, _fmt(k.default))
    if values["init.kind"] == "vortex" and "init.direction" in where:
        try:
            parse_axis(values["init.direction"])
        except ValueError as e:
            raise ConfigError(f"{source}:{where['init.direction']}: init.direction {e}") from None
    try:
        return _build(values)
    except ValueError as e:
        culprit = next((k for k in where if k.split(".")[-1] in str(e)), None)
        loc = f"{source}:{where[culprit]}" if culprit else source
        raise ConfigError(f"{loc}: {e}") from None


def format_config(spec: SimSpec) -> str:
    g, m, s = spec.grid, spec.material, spec.stepper
    values = {
        "grid.nx": g.nx, "grid.ny": g.ny, "grid.nz": g.nz,
        "grid.dx": g.dx, "grid.dy": g.dy, "grid.dz": g.dz,
        "material.Ms": m.Ms, "material.A": m.A, "material.Ku": m.Ku,
        "material.alpha": m.alpha, "material.gamma": m.gamma,
        "material.easy_axis": tuple(float(c) for c in m.easy_axis),
        "field.terms": spec.terms, "field.extern": tuple(float(c) for c in spec.h_extern),
        "init.kind": spec.init_kind,
        "init.direction": tuple(float(c) for c in spec.init_direction),
        "stepper.dt": s.dt, "stepper.max_steps": s.max_steps, "stepper.torque_tol": s.torque_tol,
        "stepper.renormalize_every": s.renormalize_every,
        "backend.kind": spec.backend, "backend.threads": spec.threads,
        "precision": spec.precision, "fft.provider": spec.fft_provider,
        "output.csv": spec.csv_path, "output.dump": spec.dump_path,
        "output.sample_every": spec.sample_every,
    }
    return "".join(f"{k.name} = {_fmt(values[k.name])}\n" for k in KEYS)


def load_config(path) -> SimSpec:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p))


# -- trajectory CSV -------------------------------------------------------------

def sample_row(s: Sample) -> list[str]:
    e = s.energy
    vals = [s.t, *s.m, e.exchange, e.anisotropy, e.demag, e.zeeman, e.total, s.max_torque]
    return [str(s.step)] + [repr(float(v)) for v in vals]


def write_trajectory(path, samples: Iterable[Sample]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in samples:
            w.writerow(sample_row(s))


# -- field dumps ----------------------------------------------------------------

_HEADER = ("nx", "ny", "nz", "dx", "dy", "dz", "Ms", "precision")


def write_field_dump(state: SimState, path, Ms: float, precision: str = "f64"):
    g = state.grid
    data = state.M.data.astype(np.float64)
    lines = [f"# {k} = {v}" for k, v in zip(
        _HEADER, (g.nx, g.ny, g.nz, repr(g.dx), repr(g.dy), repr(g.dz), repr(float(Ms)), precision))]
    lines.append("# i j k Mx My Mz")
    flat = data.reshape(3, -1)
    for idx in range(g.cell_count):
        i, j, k = g.unindex(idx)
        lines.append(f"{i} {j} {k} {flat[0, idx]:.17g} {flat[1, idx]:.17g} {flat[2, idx]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_field_dump(path) -> tuple[SimState, float, str]:
    """Return ``(state, Ms, precision)``; the state is float64."""
    p = Path(path)
    header = {}
    rows = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = (x.strip() for x in body.split("=", 1))
                header[k] = v
            continue
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"{p}:{lineno}: expected 'i j k Mx My Mz'")
        rows.append((lineno, parts))
    missing = [k for k in _HEADER if k not in header]
    if missing:
        raise ValueError(f"{p}: malformed header, missing {', '.join(missing)}")
    try:
        grid = Grid(int(header["nx"]), int(header["ny"]), int(header["nz"]),
                    float(header["dx"]), float(header["dy"]), float(header["dz"]))
        Ms = float(header["Ms"])
    except ValueError as e:
        raise ValueError(f"{p}: malformed header ({e})") from None
    if len(rows) != grid.cell_count:
        raise ValueError(f"{p}: header grid {grid.n} needs {grid.cell_count} cell lines, "
                         f"found {len(rows)}")
    flat = np.empty((3, grid.cell_count))
    seen = np.zeros(grid.cell_count, dtype=bool)
    for lineno, parts in rows:
        try:
            idx = grid.index(int(parts[0]), int(parts[1]), int(parts[2]))
            flat[:, idx] = [float(x) for x in parts[3:]]
        except (ValueError, IndexError) as e:
            raise ValueError(f"{p}:{lineno}: {e}") from None
        if seen[idx]:
            raise ValueError(f"{p}:{lineno}: duplicate cell")
        seen[idx] = True
    return SimState(VectorField(grid, flat)), Ms, header["precision"]
