"""Command-line entry point: ``relax``, ``run``, ``bench``, ``selftest`` and ``sp3``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .backend import benchmark_steps
from .config import ConfigError, SimSpec, build_problem, load_config, write_field_dump, \
    write_trajectory
from .core import Grid, MaterialParams
from .dynamics import IntegrationError, Integrator, RelaxResult, relax, run
from . import selftest
from .sp3 import crossover_pair

log = logging.getLogger("micromag")

EXIT_OK, EXIT_ERROR, EXIT_UNCONVERGED = 0, 1, 2

BENCH_SIZES = (8, 16, 32, 64)
BENCH_COLUMNS = ("N", "ms_per_step", "pad_ms", "forward_fft_ms", "spectral_multiply_ms",
                 "inverse_fft_ms", "local_fields_ms", "integrate_ms")


def _report(spec: SimSpec, result: RelaxResult, out=None):
    out = out or sys.stdout
    last = result.log[-1]
    e = last.energy
    print(f"steps {result.steps}  t = {last.t:.6g} s  max torque {last.max_torque:.4g} deg/ns",
          file=out)
    print(f"energy [J]: exchange {e.exchange:.9g}  anisotropy {e.anisotropy:.9g}  "
          f"demag {e.demag:.9g}  zeeman {e.zeeman:.9g}  total {e.total:.9g}", file=out)
    print("reduced mean m: " + " ".join(f"{c:.9f}" for c in last.m), file=out)


def _write_outputs(spec: SimSpec, result: RelaxResult):
    write_trajectory(spec.csv_path, result.log)
    write_field_dump(result.state, spec.dump_path, spec.material.Ms, spec.precision)
    log.info("wrote %s and %s", spec.csv_path, spec.dump_path)


def _simulate(spec: SimSpec, steps: Optional[int]) -> RelaxResult:
    state, field, cfg = build_problem(spec)
    try:
        if steps is None:
            return relax(state, field, cfg, sample_every=spec.sample_every)
        return run(state, field, cfg, steps, sample_every=spec.sample_every)
    finally:
        field.backend.close()


def cmd_relax(spec: SimSpec) -> int:
    try:
        result = _simulate(spec, None)
        _write_outputs(spec, result)
    except (OSError, IntegrationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    _report(spec, result)
    if result.converged:
        print("converged")
        return EXIT_OK
    print(f"not converged after {spec.stepper.max_steps} steps")
    return EXIT_UNCONVERGED


def cmd_run(spec: SimSpec, steps: int) -> int:
    try:
        result = _simulate(spec, steps)
        _write_outputs(spec, result)
    except (OSError, IntegrationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    _report(spec, result)
    return EXIT_OK


def default_bench_spec() -> SimSpec:
    return SimSpec(grid=Grid.cube(8, 5e-9), material=MaterialParams(Ms=8e5),
                   init_direction=(1.0, 0.0, 0.0), backend="parallel")


def bench_one(spec: SimSpec, n: int, warmup: int = 3, repeats: int = 20):
    """Median per-step timing of an ``n^3`` version of ``spec``."""
    g = spec.grid
    sized = replace(spec, grid=Grid(n, n, n, g.dx, g.dy, g.dz))
    state, field, cfg = build_problem(sized)
    try:
        integ = Integrator(field, cfg)
        integ.load(state)
        return benchmark_steps(integ.step, field.backend, warmup, repeats).median
    finally:
        field.backend.close()


def cmd_bench(sizes: Sequence[int], spec: Optional[SimSpec] = None,
              csv_path: str = "bench.csv", out=None) -> int:
    out = out or sys.stdout
    spec = spec or default_bench_spec()
    rows = []
    print(f"backend {spec.backend}, precision {spec.precision}, fft {spec.fft_provider}", file=out)
    print("{:>5} {:>12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}".format(
        "N", "ms/step", "pad", "fwd_fft", "multiply", "inv_fft", "local", "integ"), file=out)
    for n in sizes:
        try:
            t = bench_one(spec, n)
        except MemoryError:
            log.warning("skipping N=%d: allocation failed", n)
            continue
        ms = [1e3 * v for v in (t.total, t.pad, t.forward_fft, t.spectral_multiply,
                                t.inverse_fft, t.local_fields, t.integrate)]
        rows.append([n] + ms)
        print("{:>5} {:>12.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f}".format(
            n, *ms), file=out)
    if not rows:
        print("error: no size could be benchmarked", file=sys.stderr)
        return EXIT_ERROR
    try:
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(BENCH_COLUMNS)
            w.writerows([r[0]] + [f"{v:.6g}" for v in r[1:]] for r in rows)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_selftest(precision: str = "f64", tamper_tensor_sign: bool = False, out=None) -> int:
    out = out or sys.stdout
    hook = selftest.flip_sign if tamper_tensor_sign else None
    checks = selftest.run_checks(precision, hook)
    for c in checks:
        print(c.line(), file=out)
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed", file=out)
    return EXIT_OK if failed == 0 else EXIT_ERROR


def cmd_sp3(sizes: Sequence[float], n: int = 16, out=None, **kw) -> int:
    out = out or sys.stdout
    print(f"{'L/l_ex':>7} {'start':>7} {'steps':>7} {'conv':>5} {'E/(Km L^3)':>12}  <m>", file=out)
    ok = True
    for L in sizes:
        for r in crossover_pair(L, n=n, **kw):
            ok &= r.converged
            m = " ".join(f"{c:+.4f}" for c in r.m)
            print(f"{L:>7g} {r.start:>7} {r.steps:>7} {str(r.converged):>5} "
                  f"{r.reduced_energy:>12.6f}  {m}", file=out)
    return EXIT_OK if ok else EXIT_UNCONVERGED


def _sizes(text: str, kind=int) -> list:
    try:
        vals = [kind(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("sizes must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    p = argparse.ArgumentParser(prog="micromag", description="Finite-difference LLG solver.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("relax", parents=[common], help="relax until the torque criterion holds")
    r.add_argument("--config", required=True)

    r = sub.add_parser("run", parents=[common], help="run a fixed number of steps")
    r.add_argument("--config", required=True)
    r.add_argument("--steps", type=int, required=True)

    b = sub.add_parser("bench", parents=[common], help="per-step timing for N^3 problems")
    b.add_argument("--sizes", type=_sizes, default=list(BENCH_SIZES))
    b.add_argument("--large", action="store_true", help="also run N=128")
    b.add_argument("--config", help="template problem; its grid size is replaced")
    b.add_argument("--csv", default="bench.csv")

    s = sub.add_parser("selftest", parents=[common], help="oracle equivalence and tensor identity checks")
    s.add_argument("--precision", choices=("f64", "f32"), default="f64")
    s.add_argument("--tamper-tensor-sign", action="store_true", help=argparse.SUPPRESS)

    sp = sub.add_parser("sp3", parents=[common], help="standard problem 3 flower/vortex energies")
    sp.add_argument("--sizes", type=lambda t: _sizes(t, float), default=[8.0, 9.0],
                    help="cube edges in exchange lengths")
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--backend", choices=("serial", "parallel"), default="serial")
    sp.add_argument("--fft", choices=("radix2", "numpy"), default="radix2")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command in ("relax", "run"):
            spec = load_config(args.config)
            if args.command == "relax":
                return cmd_relax(spec)
            if args.steps < 0:
                print("error: --steps must be non-negative", file=sys.stderr)
                return EXIT_ERROR
            return cmd_run(spec, args.steps)
        if args.command == "bench":
            spec = load_config(args.config) if args.config else None
            sizes = list(args.sizes) + ([128] if args.large and 128 not in args.sizes else [])
            return cmd_bench(sizes, spec, args.csv)
        if args.command == "selftest":
            return cmd_selftest(args.precision, args.tamper_tensor_sign)
        return cmd_sp3(args.sizes, args.n, backend=args.backend, fft_provider=args.fft)
    except (ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
