"""Command line entry point: ``fasbar run | design | plot-data``.

Exit status is 0 on success, 1 on runtime failure and 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import subprocess
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CSV_COLUMNS, read_csv, run_experiment, write_csv
from .channel import ArrayGeometry
from .config import dump_config, load_config
from .errors import ConfigError, FasError
from .kernels import Kernel, KernelHyper, bessel_kernel, exponential_kernel
from .sbar import cached_plan, gram_condition_number, plan_key

log = logging.getLogger("fasbar")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def version_string() -> str:
    """``<package version>`` plus ``git describe`` output when available."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# ------------------------------------------------------------------ run


def cmd_run(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    config = load_config(path)
    if args.paper_scale:
        config = config.paper_scale()
    if args.plan_cache:
        from dataclasses import replace
        config = replace(config, plan_cache=args.plan_cache)
    output = Path(args.output or config.output or f"{path.stem}.csv")

    def progress(i, p, snr):
        log.info("grid point %d: P=%d, SNR=%g dB", i + 1, p, snr)

    results = run_experiment(config, workers=args.workers, progress=progress)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_csv(results, output)
    sidecar = output.with_name(output.name + ".meta.cfg")
    sidecar.write_text(dump_config(config, {"version": version_string(), "csv": output.name}), encoding="utf-8")
    print(f"wrote {output} ({len(results)} rows) and {sidecar}")
    return EXIT_OK


# ------------------------------------------------------------------ design


def _design_kernel(args, geometry) -> Kernel:
    base = KernelHyper.default(geometry, args.bessel_order)
    hyper = KernelHyper(
        args.alpha_sq if args.alpha_sq is not None else base.alpha_sq,
        args.eta_sq if args.eta_sq is not None else base.eta_sq,
        args.bessel_order,
    )
    if args.kernel == "bessel":
        return bessel_kernel(geometry, hyper)
    if args.kernel == "exponential":
        return exponential_kernel(geometry, hyper)
    return Kernel(np.eye(geometry.num_ports), "custom")


def cmd_design(args) -> int:
    try:
        geometry = ArrayGeometry(args.num_ports, args.wavelength, args.aperture)
    except FasError as exc:
        raise UsageError(str(exc)) from None
    kernel = _design_kernel(args, geometry)
    if args.noise_variance is not None:
        s2 = args.noise_variance
    else:
        # per-port kernel power over the SNR
        s2 = float(np.trace(kernel.matrix).real / kernel.size) / 10.0 ** (args.snr_db / 10.0)
    plan, hit = cached_plan(kernel, args.pilots, args.antennas, s2, args.cache_dir)
    path = Path(args.cache_dir) / f"{plan_key(kernel, args.pilots, args.antennas, s2)}.plan"
    print(f"cache {'hit' if hit else 'miss'}: {path}")
    print("ports: " + ",".join(str(p) for p in plan.schedule.ports))
    print(f"noise variance: {s2:.6g}")
    print(f"condition number: {gram_condition_number(kernel, plan):.6g}")
    return EXIT_OK


# ------------------------------------------------------------------ plot data


def emit_plot_data(csv_path, out_dir, x_axis="auto") -> list[Path]:
    """Write one ``<estimator>.dat`` series (x nmse_db, sorted by x) per
    estimator plus ``manifest.txt``.  Returns the written paths."""
    csv_path = Path(csv_path)
    with open(csv_path, encoding="utf-8") as f:
        header = f.readline().rstrip("\r\n").split(",")
    for col in CSV_COLUMNS:
        if col not in header:
            raise ConfigError(f"{csv_path}:{col}", "missing CSV column")
    for col in header:
        if col not in CSV_COLUMNS:
            raise ConfigError(f"{csv_path}:{col}", "unexpected CSV column")
    rows = read_csv(csv_path)
    if not rows:
        raise ConfigError(str(csv_path), "CSV has no data rows")

    if x_axis == "auto":
        x_axis = "P" if len({r["P"] for r in rows}) > 1 else "snr_db"
    series: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for i, r in enumerate(rows, start=2):
        try:
            series[r["estimator"]].append((float(r[x_axis]), float(r["nmse_db"])))
        except (TypeError, ValueError):
            raise ConfigError(f"{csv_path}:{x_axis if not _is_float(r[x_axis]) else 'nmse_db'}",
                              f"non-numeric value on line {i}") from None

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    manifest = [f"# x = {x_axis}, y = nmse_db", "# label\tfile\tpoints"]
    for label, points in series.items():
        points.sort()
        xs = [p[0] for p in points]
        if len(set(xs)) != len(xs):
            raise ConfigError(f"{csv_path}:{x_axis}", f"duplicate x values for estimator {label}")
        path = out_dir / f"{label}.dat"
        path.write_text("".join(f"{x:g} {y:.6f}\n" for x, y in points), encoding="utf-8")
        written.append(path)
        manifest.append(f"{label}\t{path.name}\t{len(points)}")
    mpath = out_dir / "manifest.txt"
    mpath.write_text("\n".join(manifest) + "\n", encoding="utf-8")
    written.append(mpath)
    return written


def _is_float(s) -> bool:
    try:
        float(s)
        return True
    except (TypeError, ValueError):
        return False


def cmd_plot_data(args) -> int:
    if not Path(args.csv).is_file():
        raise UsageError(f"CSV file not found: {args.csv}")
    written = emit_plot_data(args.csv, args.out_dir, args.x)
    for p in written:
        print(p)
    return EXIT_OK


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fasbar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo sweep from a config file")
    run.add_argument("config")
    run.add_argument("-o", "--output", help="CSV path (overrides the config)")
    run.add_argument("--paper-scale", action="store_true", help="N = 256 and pilot sweep to 20")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--plan-cache", help="directory for cached S-BAR plans")
    run.set_defaults(func=cmd_run)

    des = sub.add_parser("design", help="design (or load) an S-BAR plan and print the port schedule")
    des.add_argument("--kernel", choices=("bessel", "exponential", "identity"), default="bessel")
    des.add_argument("-N", "--num-ports", type=int, default=128)
    des.add_argument("-P", "--pilots", type=int, default=10)
    des.add_argument("-M", "--antennas", type=int, default=4)
    des.add_argument("--snr-db", type=float, default=20.0)
    des.add_argument("--noise-variance", type=float, help="design noise variance (overrides --snr-db)")
    des.add_argument("--wavelength", type=float, default=1.0)
    des.add_argument("--aperture", type=float, default=10.0)
    des.add_argument("--alpha-sq", type=float)
    des.add_argument("--eta-sq", type=float)
    des.add_argument("--bessel-order", type=int, default=0)
    des.add_argument("--cache-dir", required=True)
    des.set_defaults(func=cmd_design)

    plot = sub.add_parser("plot-data", help="turn a results CSV into per-estimator series files")
    plot.add_argument("csv")
    plot.add_argument("--out-dir", required=True)
    plot.add_argument("--x", choices=("auto", "P", "snr_db"), default="auto")
    plot.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"fasbar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FasError, OSError, ValueError, ArithmeticError) as exc:
        print(f"fasbar: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
