"""Experiment runner.

Subcommands: exponents, solve, residual, invert, dimension, distort,
garnett.  Flags may also come from a plain-text config file of
``key = value`` lines ('#' comments); explicit flags override the file.
Exit status: 0 pass, 2 numeric-check failure, 1 usage or runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import geometry, measure, operators, solver
from .coefficients import make_log_example_coefficient, parse_coefficient_spec
from .errors import BeltramiLabError
from .formats import (REPORT_COLUMNS, atomic_write_text, read_cloud_csv,
                      write_cloud_csv, write_curve_csv, write_report_csv)
from .grid import ComplexField, GridSpec

WORKERS_ENV = "BELTRAMI_LAB_WORKERS"

_CALL_RE = re.compile(r"^(?P<name>[a-z]+)\((?P<args>[^()]*)\)$")


class _UsageError(Exception):
    pass


def parse_set_spec(spec: str) -> geometry.PointCloud:
    """Parse 'cantor(rho=..,gen=..)', 'segment(n=..)', 'square(n=..)',
    'garnett(gen=..)' or 'file:<path.csv>'."""
    spec = spec.strip()
    if spec.startswith("file:"):
        pts = read_cloud_csv(spec[len("file:"):])
        return geometry.PointCloud(pts, label=spec)
    m = _CALL_RE.match(spec)
    if not m:
        raise _UsageError(f"cannot parse set spec {spec!r}")
    name = m.group("name")
    kwargs = {}
    if m.group("args").strip():
        for part in m.group("args").split(","):
            if "=" not in part:
                raise _UsageError(f"malformed set argument {part!r}")
            k, v = part.split("=", 1)
            kwargs[k.strip()] = v.strip()
    if name == "cantor":
        rho = float(kwargs.pop("rho", 0.25))
        gen = int(kwargs.pop("gen"))
        _no_extra(name, kwargs)
        return geometry.cantor_cloud(geometry.CantorSpec(gen, rho))
    if name == "segment":
        n = int(kwargs.pop("n", 8192))
        _no_extra(name, kwargs)
        return geometry.segment_cloud(n)
    if name == "square":
        n = int(kwargs.pop("n", 65536))
        _no_extra(name, kwargs)
        return geometry.square_cloud(n)
    if name == "garnett":
        gen = int(kwargs.pop("gen"))
        _no_extra(name, kwargs)
        return geometry.garnett_map(geometry.CantorSpec(gen, 0.25))
    raise _UsageError(f"unknown set family {name!r}")


def _no_extra(name, kwargs):
    if kwargs:
        raise _UsageError(f"{name}: unknown keys {sorted(kwargs)}")


def default_scales_for(label: str) -> list[float]:
    m = re.match(r"(cantor|garnett)\((?:rho=([0-9.]+),)?gen=(\d+)\)", label)
    if label.startswith("cantor") or label.startswith("garnett"):
        rho_m = re.search(r"rho=([0-9.eE+-]+)", label)
        rho = float(rho_m.group(1)) if rho_m else 0.25
        base = 1.0 / rho
        return [base ** (-k) for k in range(1, 6)]
    if label.startswith("segment"):
        return [2.0 ** (-k) for k in range(3, 10)]
    if label.startswith("square"):
        return [2.0 ** (-k) for k in range(2, 8)]
    raise _UsageError("explicit --scales required for file-backed sets")


def _parse_scales(text: str) -> list[float]:
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise _UsageError("empty --scales")
    return vals


def _emit_plot_script(out_base: Path, counts_name: str) -> None:
    script = f"""# Auto-generated plotting companion; run with any Python + matplotlib.
import csv
import matplotlib.pyplot as plt

xs, ys = [], []
with open({counts_name!r}) as fh:
    for row in csv.DictReader(fh):
        xs.append(float(row["log_inv_scale"]))
        ys.append(float(row["log_count"]))
plt.plot(xs, ys, "o-")
plt.xlabel("log 1/delta")
plt.ylabel("log N(delta)")
plt.savefig("{out_base.name}.png", dpi=150)
"""
    atomic_write_text(out_base.with_suffix(".plot.py"), script)


def _write_fit_artifacts(out: Path, fit: measure.DimensionFit) -> None:
    counts_path = out.with_suffix(".counts.csv")
    write_curve_csv(counts_path, ("scale", "count", "log_inv_scale", "log_count"),
                    [(d, c, math.log(1.0 / d), math.log(c)) for d, c in fit.counts])
    _emit_plot_script(out, counts_path.name)


# -- subcommand runners ------------------------------------------------------------


def _run_exponents(args) -> int:
    from .coefficients import critical_exponents
    rep = critical_exponents(args.p, args.K)
    p0 = "nan" if rep.p0 is None else f"{rep.p0:.12g}"
    rs = "nan" if rep.r_sup is None else f"{rep.r_sup:.12g}"
    print(f"exponents: p={args.p:g} K={args.K:g} q0={rep.q0:.12g} p0={p0} r_sup={rs}")
    if args.out:
        write_curve_csv(args.out, ("p", "K", "q0", "p0", "r_sup"),
                        [(rep.p, rep.K, rep.q0,
                          float("nan") if rep.p0 is None else rep.p0,
                          float("nan") if rep.r_sup is None else rep.r_sup)])
    return 0


def _run_solve(args) -> int:
    grid = GridSpec(args.grid, args.extent)
    mu = parse_coefficient_spec(args.coeff, grid)
    sol = solver.neumann_solve(mu, tol=args.tol, max_iter=args.max_iter)
    eq = solver.equation_residual(sol.phi_dz(), sol.phi_dzbar(), mu)
    if args.out:
        solver.save_solution(sol, args.out)
    print(f"solve: coeff={args.coeff} N={args.grid} iterations={sol.iterations} "
          f"update_residual={sol.residual:.3e} equation_residual={eq:.3e}")
    return 0


def exact_pair_residual(grid: GridSpec) -> float:
    """Strong residual of the sampled closed-form pair
    (phi = z(1 - log|z|), mu = (z/zbar)/(2 log|z| - 1)) on the annulus
    0.05 <= |z| <= 1/e.

    The displacement phi - z is tapered by a smooth radial window before
    spectral differentiation (the raw pair is not torus-periodic; the
    window leaves it untouched on the annulus).
    """
    z = grid.mesh()
    r = grid.radii()
    u = np.zeros_like(z)
    m = r > 0
    u[m] = -z[m] * np.log(r[m])
    window = solver.smooth_window(grid, 0.45, 0.9 * grid.half_extent / 2)
    uw = ComplexField(grid, window.samples * u)
    phi_dz = operators.spectral_derivative(uw, "d_z") + 1.0
    phi_dzbar = operators.spectral_derivative(uw, "d_zbar")
    mu = make_log_example_coefficient(math.exp(-1), grid)
    annulus = (r >= 0.05) & (r <= math.exp(-1))
    return solver.equation_residual(phi_dz, phi_dzbar, mu, region=annulus)


def _run_residual(args) -> int:
    grid = GridSpec(args.grid, args.extent)
    if args.coeff:
        mu = parse_coefficient_spec(args.coeff, grid)
        sol = solver.neumann_solve(mu, tol=args.tol, max_iter=args.max_iter)
        eq = solver.equation_residual(sol.phi_dz(), sol.phi_dzbar(), mu)
        limit = 10 * args.tol
        print(f"residual: coeff={args.coeff} N={args.grid} equation_residual={eq:.3e} "
              f"limit={limit:.1e}")
        return 0 if eq <= limit else 2
    eq = exact_pair_residual(grid)
    print(f"residual: closed-form pair N={args.grid} equation_residual={eq:.3e} limit=1e-03")
    return 0 if eq <= 1e-3 else 2


def _run_invert(args) -> int:
    grid = GridSpec(args.grid, args.extent)
    mu = parse_coefficient_spec(args.coeff, grid)
    sol = solver.neumann_solve(mu, tol=1e-12, max_iter=args.max_iter)
    if args.points:
        targets = read_cloud_csv(args.points)
        label = f"file:{args.points}"
    else:
        rng = np.random.default_rng(args.seed)
        half = 0.9 * grid.half_extent / 2
        targets = (rng.uniform(-half, half, args.count)
                   + 1j * rng.uniform(-half, half, args.count))
        label = f"random(n={args.count},seed={args.seed})"
    forward = sol.map_points(targets)
    back = solver.invert_points(sol, forward, tol=args.tol)
    err = float(np.max(np.abs(back - targets)))
    if args.out:
        write_cloud_csv(back, args.out)
    print(f"invert: coeff={args.coeff} targets={label} roundtrip_max_error={err:.3e} "
          f"tol={args.tol:.1e}")
    return 0 if err <= 10 * args.tol else 2


def _run_dimension(args) -> int:
    cloud = parse_set_spec(args.set)
    scales = _parse_scales(args.scales) if args.scales else default_scales_for(cloud.label)
    fit = measure.box_dimension(cloud, scales)
    if args.out:
        out = Path(args.out)
        write_curve_csv(out, ("slope", "intercept", "r_squared", "scale_min", "scale_max"),
                        [(fit.slope, fit.intercept, fit.r_squared, *fit.scale_range)])
        _write_fit_artifacts(out, fit)
    print(f"dimension: set={args.set} slope={fit.slope:.4f} r2={fit.r_squared:.5f} "
          f"scales={len(scales)}")
    return 0


def _run_distort(args) -> int:
    grid = GridSpec(args.grid, args.extent)
    mu = parse_coefficient_spec(args.coeff, grid)
    cloud = parse_set_spec(args.set)
    scales = _parse_scales(args.scales) if args.scales else default_scales_for(cloud.label)
    report = measure.distortion_experiment(mu, cloud, scales, tol=args.tol,
                                           max_iter=args.max_iter)
    gen_m = re.search(r"gen=(\d+)", cloud.label)
    row = ("distort", args.coeff, report.K, 2.0, cloud.label,
           int(gen_m.group(1)) if gen_m else 0,
           report.dim_source.slope, report.dim_image.slope, report.bound,
           report.passed)
    if args.out:
        write_report_csv([row], args.out)
        _write_fit_artifacts(Path(args.out), report.dim_image)
    print(f"distort: coeff={args.coeff} set={args.set} dim_source={report.dim_source.slope:.4f} "
          f"dim_image={report.dim_image.slope:.4f} bound={report.bound:.4f} "
          f"w12={str(report.sobolev_w12).lower()} pass={str(report.passed).lower()}")
    return 0 if report.passed else 2


def _run_garnett(args) -> int:
    spec = geometry.CantorSpec(args.generation, 0.25)
    disp = ([float(v) for v in args.displacements.split(",")]
            if args.displacements else geometry.default_garnett_displacements(args.generation))
    source = geometry.cantor_cloud(spec)
    image = geometry.garnett_map(spec, disp)
    scales = (_parse_scales(args.scales) if args.scales
              else default_scales_for(source.label))
    injective = np.unique(image.points).size == len(image)
    max_disp = float(np.max(np.abs(image.points - source.points)))
    budget = float(sum(disp))
    fit_src = measure.box_dimension(source, scales)
    fit_img = measure.box_dimension(image, scales)
    ok = (injective and max_disp <= budget + 1e-12
          and abs(fit_src.slope - 1.0) <= 0.15 and abs(fit_img.slope - 1.0) <= 0.15)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_cloud_csv(source.points, out / "source.csv")
        write_cloud_csv(image.points, out / "image.csv")
        row = ("garnett", f"gen={args.generation}", 1.0, 2.0, image.label,
               args.generation, fit_src.slope, fit_img.slope, 1.0, ok)
        write_report_csv([row], out / "report.csv")
    print(f"garnett: gen={args.generation} injective={str(injective).lower()} "
          f"max_displacement={max_disp:.6f} budget={budget:.6f} "
          f"dim_source={fit_src.slope:.4f} dim_image={fit_img.slope:.4f} "
          f"pass={str(ok).lower()}")
    return 0 if ok else 2


# -- parser ------------------------------------------------------------------------


def _build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="beltrami-lab",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    known: dict[str, set] = {}

    def add(name, runner, helptext):
        p = sub.add_parser(name, help=helptext)
        p.set_defaults(_runner=runner)
        p.add_argument("--config", default=None, help="key=value config file; flags override")
        p.add_argument("--workers", type=int, default=None,
                       help=f"FFT worker count (default ${WORKERS_ENV} or 1)")
        known[name] = {"config", "workers"}
        return p

    def arg(p, name, *a, **kw):
        p.add_argument(f"--{name}", *a, **kw)
        known[p.prog.split()[-1]].add(name.replace("-", "_"))

    p = add("exponents", _run_exponents, "integrability exponents q0, p0, r_sup")
    arg(p, "p", type=float, required=True)
    arg(p, "K", type=float, required=True)
    arg(p, "out", default=None)

    p = add("solve", _run_solve, "solve a coefficient and serialize the solution")
    arg(p, "coeff", required=True)
    arg(p, "grid", type=int, default=256)
    arg(p, "extent", type=float, default=2.0)
    arg(p, "tol", type=float, default=1e-10)
    arg(p, "max-iter", type=int, default=200, dest="max_iter")
    arg(p, "out", default=None)

    p = add("residual", _run_residual, "strong-form residual checks")
    arg(p, "coeff", default=None, help="omit to run the closed-form pair check")
    arg(p, "grid", type=int, default=1024)
    arg(p, "extent", type=float, default=2.0)
    arg(p, "tol", type=float, default=1e-10)
    arg(p, "max-iter", type=int, default=200, dest="max_iter")

    p = add("invert", _run_invert, "Newton inversion round-trip check")
    arg(p, "coeff", required=True)
    arg(p, "grid", type=int, default=256)
    arg(p, "extent", type=float, default=2.0)
    arg(p, "tol", type=float, default=1e-9)
    arg(p, "max-iter", type=int, default=200, dest="max_iter")
    arg(p, "count", type=int, default=1000)
    arg(p, "seed", type=int, default=0)
    arg(p, "points", default=None, help="CSV of targets instead of random points")
    arg(p, "out", default=None)

    p = add("dimension", _run_dimension, "box-counting dimension of a point set")
    arg(p, "set", required=True)
    arg(p, "scales", default=None, help="comma-separated box sides")
    arg(p, "out", default=None)

    p = add("distort", _run_distort, "dimension distortion experiment")
    arg(p, "coeff", required=True)
    arg(p, "set", required=True)
    arg(p, "grid", type=int, default=512)
    arg(p, "extent", type=float, default=2.0)
    arg(p, "tol", type=float, default=1e-10)
    arg(p, "max-iter", type=int, default=200, dest="max_iter")
    arg(p, "scales", default=None)
    arg(p, "out", default=None)

    p = add("garnett", _run_garnett, "Garnett displacement homeomorphism experiment")
    arg(p, "generation", type=int, default=6)
    arg(p, "displacements", default=None, help="comma-separated level displacements")
    arg(p, "scales", default=None)
    arg(p, "out", default=None)

    return parser, known


def _load_config(path: str, command: str, known: dict) -> list[str]:
    injected = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.replace("-", "_") not in known[command]:
            raise _UsageError(f"{path}:{lineno}: unknown key {key!r} for command {command!r}")
        injected.extend([f"--{key.replace('_', '-')}", value])
    return injected


def _scan_config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, known = _build_parser()
    try:
        # config values are injected before the strict parse so that
        # required flags may come from the file; explicit flags win
        command = argv[0] if argv and not argv[0].startswith("-") else None
        cfg_path = _scan_config_path(argv)
        if cfg_path is not None and command in known:
            argv = [command] + _load_config(cfg_path, command, known) + argv[1:]
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return 0 if exc.code == 0 else 1
        workers = args.workers
        if workers is None:
            workers = int(os.environ.get(WORKERS_ENV, "1"))
        operators.set_fft_workers(workers)
        return args._runner(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BeltramiLabError, ValueError, OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
