"""Experiment configuration: a typed INI file with one section per estimator.

Example::

    [experiment]
    channel = ssc
    num_ports = 128
    antennas = 4
    sweep = pilots
    pilots = 2:20
    snr_db = 20
    trials = 500
    master_seed = 7
    output = pilot_sweep_ssc.csv

    [estimator.sbar_bessel]
    type = sbar
    kernel = bessel

    [estimator.omp]
    type = omp

Grids accept comma lists (``0, 10, 20``) or inclusive ranges (``2:20`` or
``0:30:10``).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ArrayGeometry, RICH_PARAMS, SscParams
from .errors import ConfigError, InvalidGeometryError
from .kernels import KernelHyper

CHANNELS = ("ssc", "rich")
SWEEPS = ("snr", "pilots")
ESTIMATOR_TYPES = ("sbar", "omp", "ml", "selmmse")
SBAR_KERNELS = ("bessel", "exponential", "covariance")
SNR_REFERENCES = ("per_port", "total")


@dataclass(frozen=True)
class EstimatorSpec:
    name: str
    kind: str
    kernel: str | None = None
    hyper: KernelHyper | None = None
    training_samples: int = 100
    sparsity: int | None = None
    max_iters: int = 50
    design_snr_db: float | None = None

    @property
    def kernel_column(self) -> str:
        return self.kernel if self.kind == "sbar" else "-"


@dataclass(frozen=True)
class ExperimentConfig:
    estimators: tuple[EstimatorSpec, ...]
    channel: str = "ssc"
    geometry: ArrayGeometry = field(default_factory=lambda: ArrayGeometry(128))
    ssc: SscParams = field(default_factory=SscParams)
    antennas: int = 4
    sweep: str = "pilots"
    snr_db: tuple[float, ...] = (20.0,)
    pilots: tuple[int, ...] = (10,)
    trials: int = 500
    master_seed: int = 0
    snr_reference: str = "per_port"
    power_calibration_trials: int = 10_000
    output: str | None = None
    plan_cache: str | None = None

    @property
    def channel_params(self) -> SscParams:
        return self.ssc if self.channel == "ssc" else RICH_PARAMS

    def grid(self) -> list[tuple[int, float]]:
        """(P, snr_db) points in sweep order."""
        if self.sweep == "snr":
            return [(self.pilots[0], s) for s in self.snr_db]
        return [(p, self.snr_db[0]) for p in self.pilots]

    def paper_scale(self) -> "ExperimentConfig":
        """Full-size variant: N = 256 and pilot sweep up to 20."""
        geom = ArrayGeometry(256, self.geometry.wavelength, self.geometry.aperture)
        pilots = self.pilots
        if self.sweep == "pilots":
            pilots = tuple(range(min(self.pilots), 21))
        return replace(self, geometry=geom, pilots=pilots)


def _parse_grid(text: str, cast, where: str) -> tuple:
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1.0)
            lo, hi, step = parts
            if step <= 0:
                raise ValueError("step must be positive")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            values = [cast(lo + i * step) for i in range(count)]
        else:
            values = [cast(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(where, f"cannot parse grid {text!r} ({exc})") from None
    if not values:
        raise ConfigError(where, "grid is empty")
    if list(values) != sorted(values) or len(set(values)) != len(values):
        raise ConfigError(where, "grid must be strictly increasing")
    return tuple(values)


def _int(value) -> int:
    f = float(value)
    if f != int(f):
        raise ValueError(f"{value!r} is not an integer")
    return int(f)


class _Section:
    """Typed accessor that reports dotted field paths and rejects unknown keys."""

    def __init__(self, parser, name):
        self.name = name
        self.data = dict(parser[name]) if parser.has_section(name) else {}
        self.used = set()

    def get(self, key, cast, default=None, check=None, what=""):
        self.used.add(key)
        where = f"{self.name}.{key}"
        if key not in self.data:
            return default
        raw = self.data[key].strip()
        try:
            value = cast(raw)
        except (TypeError, ValueError):
            raise ConfigError(where, f"expected {what or cast.__name__}, got {raw!r}") from None
        if check is not None and not check(value):
            raise ConfigError(where, f"expected {what}, got {raw!r}")
        return value

    def choice(self, key, options, default=None):
        return self.get(key, str, default, lambda v: v in options, "one of " + ", ".join(options))

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"{self.name}.{extra[0]}", "unknown key")


def _positive(v):
    return v > 0


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    if not parser.has_section("experiment"):
        raise ConfigError("experiment", "missing [experiment] section")
    unknown = [s for s in parser.sections() if s not in ("experiment", "meta") and not s.startswith("estimator.")]
    if unknown:
        raise ConfigError(unknown[0], "unknown section")

    ex = _Section(parser, "experiment")
    channel = ex.choice("channel", CHANNELS, "ssc")
    n = ex.get("num_ports", _int, 128, _positive, "positive integer")
    wavelength = ex.get("wavelength", float, 1.0, _positive, "positive number")
    aperture = ex.get("aperture", float, 10.0 * wavelength, _positive, "positive number")
    try:
        geometry = ArrayGeometry(n, wavelength, aperture)
    except InvalidGeometryError as exc:
        raise ConfigError("experiment.num_ports", str(exc)) from None
    clusters = ex.get("num_clusters", _int, 9, _positive, "positive integer")
    rays = ex.get("rays_per_cluster", _int, 100, _positive, "positive integer")
    spread = float(np.deg2rad(ex.get("max_angle_spread_deg", float, 5.0, lambda v: 0 <= v <= 180,
                                     "angle in [0, 180] degrees")))
    if "max_angle_spread_deg" in ex.data and "max_angle_spread_rad" in ex.data:
        raise ConfigError("experiment.max_angle_spread_rad", "give the spread in degrees or radians, not both")
    # radians key lets resolved configs round-trip bit-exactly
    spread = ex.get("max_angle_spread_rad", float, spread, lambda v: 0 <= v <= np.pi, "angle in [0, pi] radians")
    ssc = SscParams(clusters, rays, spread)
    antennas = ex.get("antennas", _int, 4, _positive, "positive integer")
    sweep = ex.choice("sweep", SWEEPS, "pilots")
    ex.used.update({"snr_db", "pilots"})
    snr_grid = _parse_grid(ex.data.get("snr_db", "20"), float, "experiment.snr_db")
    pilot_grid = _parse_grid(ex.data.get("pilots", "10"), _int, "experiment.pilots")
    if any(p < 1 for p in pilot_grid):
        raise ConfigError("experiment.pilots", "pilot counts must be positive")
    fixed = "pilots" if sweep == "snr" else "snr_db"
    if len(pilot_grid if sweep == "snr" else snr_grid) != 1:
        raise ConfigError(f"experiment.{fixed}", f"must be a single value when sweeping {sweep}")
    if max(pilot_grid) * antennas > n:
        raise ConfigError("experiment.pilots", f"P*M = {max(pilot_grid) * antennas} exceeds num_ports = {n}")
    trials = ex.get("trials", _int, 500, _positive, "positive integer")
    seed = ex.get("master_seed", _int, 0, lambda v: v >= 0, "non-negative integer")
    reference = ex.choice("snr_reference", SNR_REFERENCES, "per_port")
    calib = ex.get("power_calibration_trials", _int, 10_000, _positive, "positive integer")
    output = ex.get("output", str, None)
    cache = ex.get("plan_cache", str, None)
    ex.finish()

    default_l = 2 * (ssc.num_clusters if channel == "ssc" else RICH_PARAMS.num_clusters)
    estimators = []
    for section in parser.sections():
        if not section.startswith("estimator."):
            continue
        name = section.split(".", 1)[1]
        if not name or any(c in name for c in ", \t"):
            raise ConfigError(section, "estimator names must be non-empty without commas or spaces")
        es = _Section(parser, section)
        kind = es.choice("type", ESTIMATOR_TYPES)
        if kind is None:
            raise ConfigError(f"{section}.type", "missing; one of " + ", ".join(ESTIMATOR_TYPES))
        spec = EstimatorSpec(name, kind)
        if kind == "sbar":
            kernel = es.choice("kernel", SBAR_KERNELS, "bessel")
            base = KernelHyper.default(geometry)
            hyper = KernelHyper(
                es.get("alpha_sq", float, base.alpha_sq, _positive, "positive number"),
                es.get("eta_sq", float, base.eta_sq, _positive, "positive number"),
                es.get("bessel_order", _int, 0, lambda v: v >= 0, "non-negative integer"),
            )
            spec = replace(
                spec,
                kernel=kernel,
                hyper=hyper,
                training_samples=es.get("training_samples", _int, 100, _positive, "positive integer"),
                design_snr_db=es.get("design_snr_db", float, None),
            )
        elif kind in ("omp", "ml"):
            spec = replace(spec, sparsity=es.get("sparsity", _int, default_l, _positive, "positive integer"))
            if kind == "ml":
                spec = replace(spec, max_iters=es.get("max_iters", _int, 50, _positive, "positive integer"))
        es.finish()
        estimators.append(spec)
    if not estimators:
        raise ConfigError("estimator", "at least one [estimator.<name>] section is required")

    return ExperimentConfig(
        estimators=tuple(estimators),
        channel=channel,
        geometry=geometry,
        ssc=ssc,
        antennas=antennas,
        sweep=sweep,
        snr_db=snr_grid,
        pilots=pilot_grid,
        trials=trials,
        master_seed=seed,
        snr_reference=reference,
        power_calibration_trials=calib,
        output=output,
        plan_cache=cache,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def dump_config(config: ExperimentConfig, meta: dict | None = None) -> str:
    """Fully resolved config in the same INI format (re-parses to an equal config)."""
    g = config.geometry
    lines = ["[experiment]"]
    fields = [
        ("channel", config.channel),
        ("num_ports", g.num_ports),
        ("wavelength", _fmt(g.wavelength)),
        ("aperture", _fmt(g.aperture)),
        ("num_clusters", config.ssc.num_clusters),
        ("rays_per_cluster", config.ssc.rays_per_cluster),
        ("max_angle_spread_rad", _fmt(float(config.ssc.max_angle_spread))),
        ("antennas", config.antennas),
        ("sweep", config.sweep),
        ("snr_db", ", ".join(_fmt(float(s)) for s in config.snr_db)),
        ("pilots", ", ".join(str(p) for p in config.pilots)),
        ("trials", config.trials),
        ("master_seed", config.master_seed),
        ("snr_reference", config.snr_reference),
        ("power_calibration_trials", config.power_calibration_trials),
    ]
    if config.output is not None:
        fields.append(("output", config.output))
    if config.plan_cache is not None:
        fields.append(("plan_cache", config.plan_cache))
    lines += [f"{k} = {v}" for k, v in fields]
    for est in config.estimators:
        lines += ["", f"[estimator.{est.name}]", f"type = {est.kind}"]
        if est.kind == "sbar":
            lines += [
                f"kernel = {est.kernel}",
                f"alpha_sq = {_fmt(est.hyper.alpha_sq)}",
                f"eta_sq = {_fmt(est.hyper.eta_sq)}",
                f"bessel_order = {est.hyper.bessel_order}",
                f"training_samples = {est.training_samples}",
            ]
            if est.design_snr_db is not None:
                lines.append(f"design_snr_db = {_fmt(float(est.design_snr_db))}")
        elif est.kind in ("omp", "ml"):
            lines.append(f"sparsity = {est.sparsity}")
            if est.kind == "ml":
                lines.append(f"max_iters = {est.max_iters}")
    if meta:
        lines += ["", "[meta]"] + [f"{k} = {v}" for k, v in meta.items()]
    return "\n".join(lines) + "\n"
