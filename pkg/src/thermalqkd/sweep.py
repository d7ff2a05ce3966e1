"""
Parameter sweeps: configuration, grid evaluation, CSV and plot-script output.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .empirical import (
    derive_seed,
    empirical_cmi,
    empirical_cmi_se,
    g2_auto_stats,
    g2_cross_stats,
    sample_covariance_zscores,
    sample_quadratures,
    sign_bit_cmi,
    slice_bits,
    thermality_verdict,
)
from .gaussian import bose_einstein_nbar, check_physical, reduce
from .network import ProtocolParams, build_network, oracle_residual
from .secrecy import secrecy_report, secrecy_verdict

SEED_ENV = "THERMAL_SIM_SEED"
MAX_SEED = 2 ** 64 - 1

PROTOCOL_KEYS = ("eta1", "eta2", "eta3", "eta4", "ve", "nbar", "eps3", "eps4", "source")
RUN_KEYS = (
    "preset", "omega", "temp", "mode", "samples", "seed", "seed-policy", "jobs", "out",
    "sweep", "series", "levels", "thermal-variance-convention",
)
VALID_KEYS = PROTOCOL_KEYS + RUN_KEYS
SWEEPABLE = ("eta1", "eta2", "eta3", "eta4", "ve", "nbar", "eps3", "eps4")

DEFAULTS = {
    "eta1": 1.0,
    "eta2": 0.5,
    "eta3": 0.2,
    "eta4": 0.2,
    "eps3": 0.01,
    "eps4": 0.01,
    "ve": 1.0,
    "nbar": 1309.0,
    "source": "thermal",
    "mode": "analytic",
    "samples": 1_000_000,
    "seed-policy": "common",
    "jobs": 1,
    "out": "results",
    "sweep": "eta1=0.02:1:50",
    "series": "",
    "levels": 2,
    "thermal-variance-convention": "2n+1",
}

_FIG_SOURCE = {"omega": "3e10", "temp": "300"}
PRESETS: dict[str, dict[str, str]] = {
    "fig-cmi": {**_FIG_SOURCE, "sweep": "eta1=0.02:1:50", "series": "ve=1,50,250", "mode": "analytic"},
    "fig-discord": {**_FIG_SOURCE, "sweep": "eta1=0.02:1:50", "series": "ve=1,50,250", "mode": "analytic"},
    "fig-experimental": {
        **_FIG_SOURCE,
        "sweep": "eta1=0.02:1:50;eta2=0.02:1:50",
        "series": "source=thermal,coherent",
        "mode": "sampled",
        "samples": "100000",
    },
    "fig-coherent": {
        **_FIG_SOURCE,
        "sweep": "eta1=0.02:1:50",
        "source": "coherent",
        "mode": "both",
        "samples": "1000000",
    },
}

#: column(s) drawn by each preset's plot script
PLOT_COLUMNS = {
    "fig-cmi": ["i_ab_given_e"],
    "fig-discord": ["discord_b_given_a"],
    "fig-experimental": ["cmi_empirical"],
    "fig-coherent": ["i_ab_given_e", "cmi_empirical"],
}


class ConfigError(ValueError):
    """Invalid configuration (exit status 2)."""


class NumericalError(RuntimeError):
    """A grid point failed numerically (exit status 3)."""


@dataclass(frozen=True)
class SweepSpec:
    axes: dict[str, list[float]]
    series: tuple[str, list] | None
    base: dict
    mode: str = "analytic"
    n_samples: int = 1_000_000
    seed: int = 0
    seed_policy: str = "common"
    jobs: int = 1
    out: Path = Path("results")
    levels: int = 2
    name: str = "sweep"
    config: dict = field(default_factory=dict)

    def points(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, values)) for values in itertools.product(*self.axes.values())]


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _normalize(raw: dict) -> dict[str, str]:
    out = {}
    for key, value in raw.items():
        k = key.strip().lstrip("-").replace("_", "-")
        if k not in VALID_KEYS:
            raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(VALID_KEYS)}")
        out[k] = str(value).strip()
    return out


def _number(key: str, value, lo=None, hi=None, lo_open=False, integer=False):
    try:
        x = int(value) if integer else float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {'an integer' if integer else 'a number'}, got {value!r}") from None
    too_low = lo is not None and (x <= lo if lo_open else x < lo)
    if too_low or (hi is not None and x > hi) or (not integer and not math.isfinite(x)):
        left = "(" if lo_open else "["
        right = f"{hi:g}]" if hi is not None else "inf)"
        raise ConfigError(f"{key} = {value} is out of range; legal domain is {left}{lo:g}, {right}")
    return x


DOMAINS = {
    "eta1": (0.0, 1.0), "eta2": (0.0, 1.0), "eta3": (0.0, 1.0), "eta4": (0.0, 1.0),
    "ve": (1.0, None), "nbar": (0.0, None), "eps3": (0.0, None), "eps4": (0.0, None),
}


def _protocol_value(key: str, value):
    if key == "source":
        if value not in ("thermal", "coherent"):
            raise ConfigError(f"source = {value} is out of range; legal values: thermal, coherent")
        return value
    lo, hi = DOMAINS[key]
    return _number(key, value, lo, hi)


def _parse_grid(text: str) -> dict[str, list]:
    """``name=start:stop:count`` or ``name=v1,v2,...``, several joined by ``;``."""
    axes = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        if "=" not in part:
            raise ConfigError(f"grid {part!r} must look like name=start:stop:count or name=v1,v2")
        name, spec = (s.strip() for s in part.split("=", 1))
        if name not in SWEEPABLE and name != "source":
            raise ConfigError(f"cannot sweep {name!r}; sweepable: {', '.join(SWEEPABLE + ('source',))}")
        if ":" in spec and name != "source":
            bits = spec.split(":")
            if len(bits) != 3:
                raise ConfigError(f"range grid {spec!r} must be start:stop:count")
            start = _number(f"{name} grid start", bits[0])
            stop = _number(f"{name} grid stop", bits[1])
            count = _number(f"{name} grid count", bits[2], 1, None, integer=True)
            values = [float(v) for v in np.linspace(start, stop, count)]
        else:
            values = [s.strip() for s in spec.split(",") if s.strip()]
        if not values:
            raise ConfigError(f"empty grid for {name}")
        axes[name] = [_protocol_value(name, v) for v in values]
    return axes


def parse_config(path=None, flags: dict | None = None, env: dict | None = None, require_grid: bool = True) -> SweepSpec:
    """Merge preset, config file and flags (later wins) into a ``SweepSpec``."""
    env = os.environ if env is None else env
    file_cfg = _normalize(read_config_file(path)) if path else {}
    flag_cfg = _normalize({k: v for k, v in (flags or {}).items() if v is not None})
    preset = flag_cfg.get("preset", file_cfg.get("preset"))
    if preset and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
    explicit = {**file_cfg, **flag_cfg}
    cfg = {**DEFAULTS, **(PRESETS.get(preset, {}) if preset else {}), **explicit}
    if "seed" not in cfg:
        cfg["seed"] = env.get(SEED_ENV, "0")

    base = {k: _protocol_value(k, cfg[k]) for k in PROTOCOL_KEYS}
    if "nbar" not in explicit and "omega" in cfg and "temp" in cfg:
        omega = _number("omega", cfg["omega"], 0.0, None, lo_open=True)
        temp = _number("temp", cfg["temp"], 0.0, None, lo_open=True)
        base["nbar"] = bose_einstein_nbar(omega, temp)
    convention = cfg["thermal-variance-convention"]
    if convention not in ("2n+1", "2n+2"):
        raise ConfigError(f"thermal-variance-convention = {convention} is out of range; legal values: 2n+1, 2n+2")
    base["variance_convention"] = convention

    mode = cfg["mode"]
    if mode not in ("analytic", "sampled", "both"):
        raise ConfigError(f"mode = {mode} is out of range; legal values: analytic, sampled, both")
    policy = cfg["seed-policy"]
    if policy not in ("common", "per-point"):
        raise ConfigError(f"seed-policy = {policy} is out of range; legal values: common, per-point")

    axes = _parse_grid(cfg["sweep"])
    if not axes and require_grid:
        raise ConfigError("sweep needs at least one grid axis")
    series_axes = _parse_grid(cfg["series"]) if cfg["series"] else {}
    if len(series_axes) > 1:
        raise ConfigError("only one series parameter is supported")
    series = next(iter(series_axes.items())) if series_axes else None

    spec = SweepSpec(
        axes=axes,
        series=series,
        base=base,
        mode=mode,
        n_samples=_number("samples", cfg["samples"], 1, None, integer=True),
        seed=_number("seed", cfg["seed"], 0, MAX_SEED, integer=True),
        seed_policy=policy,
        jobs=_number("jobs", cfg["jobs"], 1, None, integer=True),
        out=Path(cfg["out"]),
        levels=_number("levels", cfg["levels"], 2, None, integer=True),
        name=preset or "sweep",
        config={k: cfg[k] for k in sorted(cfg)},
    )
    for point in spec.points():
        for s in (spec.series[1] if spec.series else [None]):
            _params(spec, point, s)
    return spec


def _params(spec: SweepSpec, point: dict, series_value=None) -> ProtocolParams:
    values = dict(spec.base)
    values.update(point)
    if spec.series is not None and series_value is not None:
        values[spec.series[0]] = series_value
    try:
        return ProtocolParams(
            source_kind=values["source"],
            nbar=values["nbar"],
            ve=values["ve"],
            eta1=values["eta1"],
            eta2=values["eta2"],
            eta3=values["eta3"],
            eta4=values["eta4"],
            eps3=values["eps3"],
            eps4=values["eps4"],
            variance_convention=values["variance_convention"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid parameter combination at {point}: {exc}") from None


def evaluate_point(params: ProtocolParams, mode: str, n_samples: int, seed: int, levels: int = 2) -> dict:
    """All result columns for one grid point."""
    try:
        output = build_network(params)
    except Exception as exc:
        raise NumericalError(f"network construction failed at {params}: {exc}") from exc
    row = {
        "source": params.source_kind,
        "eta1": params.eta1,
        "eta2": params.eta2,
        "eta3": params.eta3,
        "eta4": params.eta4,
        "eps3": params.eps3,
        "eps4": params.eps4,
        "ve": params.ve,
        "vs": params.source_variance,
        "n3": params.n3,
        "n4": params.n4,
        "physical": check_physical(output.Gamma_out).ok,
    }
    if 0.0 < params.eta3 < 1.0 and 0.0 < params.eta4 < 1.0:
        row["oracle_residual"] = oracle_residual(output)
    else:
        row["oracle_residual"] = float("nan")

    if mode in ("analytic", "both"):
        try:
            report = secrecy_report(output)
        except Exception as exc:
            raise NumericalError(f"secrecy metrics failed at {params}: {exc}") from exc
        row.update(
            i_ab=report.i_ab,
            i_ab_given_e=report.i_ab_given_e,
            discord_b_given_a=report.discord_b_given_a,
            discord_quadrature=report.discord_argmin_quadrature,
            verdict=secrecy_verdict(report),
        )

    if mode in ("sampled", "both"):
        abe = reduce(output.Gamma_out, ["a", "b", "e"])
        batch = sample_quadratures(abe, n_samples, seed)
        bits = [slice_bits(batch.x(m), levels, origin=m) for m in ("a", "b", "e")]
        g2a = g2_auto_stats(batch.x("a"), batch.p("a"))
        g2b = g2_auto_stats(batch.x("b"), batch.p("b"))
        g2ab = g2_cross_stats(batch.x("a"), batch.p("a"), batch.x("b"), batch.p("b"))
        cmi, se = empirical_cmi(*bits), empirical_cmi_se(*bits)
        row.update(
            sample_seed=seed,
            cmi_empirical=cmi,
            cmi_empirical_se=se,
            g2_auto_a=g2a[0],
            g2_auto_a_se=g2a[1],
            g2_auto_b=g2b[0],
            g2_auto_b_se=g2b[1],
            g2_cross_ab=g2ab[0],
            g2_cross_ab_se=g2ab[1],
            thermal_a=thermality_verdict(*g2a),
            thermal_b=thermality_verdict(*g2b),
            cov_max_abs_z=float(np.max(np.abs(sample_covariance_zscores(batch, abe.cov)))),
        )
        if mode == "both" and levels == 2:
            q = [0, 2, 4]
            exact = sign_bit_cmi(abe.cov[np.ix_(q, q)])
            row.update(cmi_signbit_exact=exact, cmi_z=(cmi - exact) / se)
    return row


def _evaluate(task):
    return evaluate_point(*task)


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def render_csv(rows: list[dict], meta: dict[str, str]) -> str:
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key} = {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    columns = list(rows[0])
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row[c]) for c in columns])
    return buf.getvalue()


def read_csv(path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Metadata preamble and rows (as strings) of a sweep CSV."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def _series_tag(name: str, value) -> str:
    return f"{name}{format_cell(value)}"


def plot_script(spec: SweepSpec, csv_files: list[tuple[str, Path]]) -> str:
    """gnuplot script drawing the preset's columns from the emitted CSVs."""
    columns = PLOT_COLUMNS.get(spec.name, ["i_ab_given_e"] if spec.mode != "sampled" else ["cmi_empirical"])
    axes = list(spec.axes)
    lines = [
        f"# gnuplot script for {spec.name}",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key outside",
        f"set terminal pngcairo size {700 * len(columns)},500",
        f"set output '{spec.name}.png'",
        f"set multiplot layout 1,{len(columns)}" if len(columns) > 1 else "",
    ]
    for col in columns:
        lines.append(f"set title '{col}'")
        lines.append(f"set xlabel '{axes[0]}'")
        if len(axes) >= 2:
            lines.append(f"set ylabel '{axes[1]}'")
            lines.append("set pm3d map")
            plots = [f"'{p.name}' using '{axes[0]}':'{axes[1]}':'{col}' title '{tag}'" for tag, p in csv_files]
            lines.append("splot " + ", \\\n      ".join(plots))
        else:
            lines.append(f"set ylabel '{col} (bits)'")
            plots = [f"'{p.name}' using '{axes[0]}':'{col}' with linespoints title '{tag}'" for tag, p in csv_files]
            lines.append("plot " + ", \\\n     ".join(plots))
    if len(columns) > 1:
        lines.append("unset multiplot")
    return "\n".join(line for line in lines if line != "") + "\n"


def run_sweep(spec: SweepSpec) -> list[Path]:
    """Evaluate every grid point and write one CSV per series plus a plot script."""
    try:
        spec.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {spec.out}: {exc}") from None
    points = spec.points()
    series_values = spec.series[1] if spec.series else [None]
    written = []
    for s in series_values:
        tasks = []
        for k, point in enumerate(points):
            seed = spec.seed if spec.seed_policy == "common" else derive_seed(spec.seed, k)
            tasks.append((_params(spec, point, s), spec.mode, spec.n_samples, seed, spec.levels))
        if spec.jobs > 1:
            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                rows = list(pool.map(_evaluate, tasks, chunksize=max(1, len(tasks) // (4 * spec.jobs))))
        else:
            rows = [_evaluate(t) for t in tasks]
        meta = {"artifact": f"thermalqkd {__version__}", "preset": spec.name}
        meta.update({k: v for k, v in spec.config.items() if k not in ("jobs", "out")})
        meta["nbar"] = format_cell(spec.base["nbar"])
        meta["seed"] = str(spec.seed)
        tag = _series_tag(*spec.series[:1], s) if spec.series else ""
        if spec.series:
            meta["series-value"] = f"{spec.series[0]}={format_cell(s)}"
        stem = f"{spec.name}_{tag}" if tag else spec.name
        path = spec.out / f"{stem}.csv"
        try:
            path.write_text(render_csv(rows, meta), newline="")
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from None
        written.append((tag or spec.name, path))
    script = spec.out / f"{spec.name}.gp"
    script.write_text(plot_script(spec, written))
    return [p for _, p in written] + [script]


def run(config=None, flags: dict | None = None, env: dict | None = None) -> tuple[int, list[Path]]:
    """Parse, evaluate and write a sweep; returns ``(exit_status, artifacts)``.

    Status is 0 on success, 2 for configuration or output-path problems and
    3 when a grid point fails numerically.  Errors are reported on stderr.
    """
    try:
        return 0, run_sweep(parse_config(config, flags, env))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2, []
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3, []
