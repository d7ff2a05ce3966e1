"""Command-line interface: ``thermalqkd {sweep,photon-number,g2,report}``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .empirical import g2_auto_stats, g2_cross_stats, sample_quadratures, thermality_verdict
from .gaussian import UnphysicalStateError, bose_einstein_nbar, reduce
from .network import NetworkStageError, build_network
from .secrecy import secrecy_report, secrecy_verdict
from .sweep import (
    PRESETS,
    ConfigError,
    NumericalError,
    _params,
    evaluate_point,
    parse_config,
    render_csv,
    run,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    for name in ("eta1", "eta2", "eta3", "eta4"):
        p.add_argument(f"--{name}", help="transmittance in [0, 1]")
    p.add_argument("--ve", help="Eve's input variance (SNU, >= 1)")
    p.add_argument("--nbar", help="mean photon number of the thermal source")
    p.add_argument("--omega", help="angular frequency (rad/s) for deriving nbar")
    p.add_argument("--temp", help="source temperature (K) for deriving nbar")
    p.add_argument("--eps3", help="excess noise on Alice's channel")
    p.add_argument("--eps4", help="excess noise on Bob's channel")
    p.add_argument("--source", choices=["thermal", "coherent"])
    p.add_argument("--thermal-variance-convention", choices=["2n+1", "2n+2"])
    p.add_argument("--samples", help="Monte Carlo sample count")
    p.add_argument("--seed", help="64-bit seed (fallback: $THERMAL_SIM_SEED)")
    p.add_argument("--levels", help="slicing levels per sample (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermalqkd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a parameter sweep and write CSV + gnuplot script")
    _add_protocol_flags(sweep)
    sweep.add_argument("--mode", choices=["analytic", "sampled", "both"])
    sweep.add_argument("--sweep", help="grid, e.g. 'eta1=0.02:1:50;eta2=0.1,0.5'")
    sweep.add_argument("--series", help="one CSV per value, e.g. 've=1,50,250'")
    sweep.add_argument("--seed-policy", choices=["common", "per-point"])
    sweep.add_argument("--jobs", help="parallel worker processes")
    sweep.add_argument("--out", help="output directory")

    pn = sub.add_parser("photon-number", help="Bose-Einstein mean photon number")
    pn.add_argument("--omega", type=float, required=True, help="angular frequency (rad/s)")
    pn.add_argument("--temp", type=float, required=True, help="temperature (K)")

    g2 = sub.add_parser("g2", help="sampled g2 thermality check at one parameter point")
    _add_protocol_flags(g2)

    report = sub.add_parser("report", help="analytic secrecy report at one parameter point")
    _add_protocol_flags(report)
    return parser


def _flags(args: argparse.Namespace, skip=("command", "config")) -> dict:
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def _single_point(args):
    spec = parse_config(args.config, {**_flags(args), "sweep": "", "series": ""}, require_grid=False)
    return spec, _params(spec, {})


def _cmd_report(args) -> int:
    spec, params = _single_point(args)
    report = secrecy_report(build_network(params))
    verdict = secrecy_verdict(report)
    print(f"source           {params.source_kind} (Vs = {params.source_variance:.6g} SNU)")
    print(f"eta1..eta4       {params.eta1:g} {params.eta2:g} {params.eta3:g} {params.eta4:g}")
    print(f"Ve, eps3, eps4   {params.ve:g} {params.eps3:g} {params.eps4:g}")
    print(f"I(A:B)           {report.i_ab:.9g} bits")
    print(f"I(A:B|E)         {report.i_ab_given_e:.9g} bits")
    print(f"D(B|A)           {report.discord_b_given_a:.9g} bits (homodyne {report.discord_argmin_quadrature})")
    print(f"physical         {report.physical}")
    print(f"verdict          {verdict}")
    print()
    row = evaluate_point(params, "analytic", 1, spec.seed)
    sys.stdout.write(render_csv([row], {}))
    return EXIT_OK


def _cmd_g2(args) -> int:
    spec, params = _single_point(args)
    state = reduce(build_network(params).Gamma_out, ["a", "b"])
    batch = sample_quadratures(state, spec.n_samples, spec.seed)
    rows = {
        "g2_auto_a": g2_auto_stats(batch.x("a"), batch.p("a")),
        "g2_auto_b": g2_auto_stats(batch.x("b"), batch.p("b")),
        "g2_cross_ab": g2_cross_stats(batch.x("a"), batch.p("a"), batch.x("b"), batch.p("b")),
    }
    print(f"samples {spec.n_samples}, seed {spec.seed}, source {params.source_kind}")
    for name, (value, se) in rows.items():
        print(f"{name:12s} {value:.6f} +/- {se:.6f}  thermal={thermality_verdict(value, se)}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    status, paths = run(args.config, _flags(args))
    for path in paths:
        print(path)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "photon-number":
            nbar = bose_einstein_nbar(args.omega, args.temp)
            print(f"{nbar:.1f}")
            return EXIT_OK
        return {"sweep": _cmd_sweep, "g2": _cmd_g2, "report": _cmd_report}[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, NetworkStageError, UnphysicalStateError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
