"""Command line: ``cqwave run|converge|poles|scan <config>``."""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import __version__
from .config import ConfigError, load_config
from .bem import Formulation, refine_scan_peak
from .engine import (
    WORKERS_ENV,
    convergence_study,
    emit_outputs,
    omega_scan,
    parse_omega_axis,
    pole_report,
    resolve_mesh,
    run_cq,
)

logger = logging.getLogger("cqwave")


def _parse_nf_list(text: str) -> list:
    """``"40,60,80"`` or ``"40:200:20"`` (inclusive)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (int(v) for v in text.split(":"))
        return list(range(start, stop + 1, step))
    return [int(v) for v in text.split(",") if v]


def _cmd_run(args, config):
    field = run_cq(config)
    paths = emit_outputs(config, field=field, directory=args.output_dir)
    print(f"wrote {len(field.points)} point(s) x {field.values.shape[0]} step(s)")
    return paths


def _cmd_converge(args, config):
    nfs = _parse_nf_list(args.nf) if args.nf else list(config.nf_list or ())
    if not nfs:
        raise ConfigError("no Nf values: pass --nf or set nf_list in the config")
    rows, _ = convergence_study(config, nfs, reference_nf=args.reference_nf)
    for r in rows:
        print(f"Nf={r.n_freq:5d}  abs_diff={r.abs_diff:.6e}")
    fitted, pred = rows[0].fitted_rate, rows[0].predicted_rate
    print(f"fitted rate {fitted:.5f}" if not math.isnan(fitted) else "fitted rate unavailable")
    if not math.isnan(pred):
        print(f"predicted rate {pred:.5f}")
    return emit_outputs(config, rows=rows, directory=args.output_dir)


def _cmd_poles(args, config):
    report = pole_report(config)
    if report is None:
        raise ConfigError("no analytic pole atlas for this configuration (non-sphere mesh or complex eta)")
    d = report.dominant
    print(f"lambda_B={report.lambda_B:.6f} lambda_G={report.lambda_G:.6g} lambda_U={report.lambda_U:.6f}")
    if d is not None:
        print(f"dominant: {d.kind} n={d.n} k={d.k_value:.10g} |z|={d.z_modulus:.6f}")
    try:
        print(f"predicted rate at lam={config.lam}: {report.rate(config.lam):.6f}")
    except ValueError as exc:
        print(f"predicted rate unavailable: {exc}")
    return emit_outputs(config, report=report, directory=args.output_dir)


def _cmd_scan(args, config):
    omegas = parse_omega_axis(args.omega_axis)
    mesh = resolve_mesh(config)
    p = omega_scan(config, omegas, mesh=mesh)
    best = int(p.argmax())
    print(f"scanned {len(omegas)} frequencies; max p={p[best]:.6e} at omega={complex(omegas[best]):.6g}")
    extra = None
    if args.refine:
        peak = refine_scan_peak(mesh, Formulation(config.formulation, config.eta_complex), omegas, p)
        if peak is None:
            print("no interior local maximum to refine")
        else:
            print(f"refined peak: omega={peak[0]:.8g} p={peak[1]:.6e}")
            extra = {"refined_peak": {"omega": [peak[0].real, peak[0].imag], "p": peak[1]}}
    return emit_outputs(config, scan=(omegas, p), directory=args.output_dir, extra=extra)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cqwave",
        description="Convolution-quadrature wave scattering solver and pole atlas.",
        epilog=f"The environment variable {WORKERS_ENV} overrides the configured worker count.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, func):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--output-dir", default=None, help="override output.directory")
        p.set_defaults(func=func)
        return p

    add("run", "time-domain field at the observation points", _cmd_run)
    conv = add("converge", "AbsDiff convergence study in Nf", _cmd_converge)
    conv.add_argument("--nf", help="node counts, e.g. 40,60,80 or 40:200:20")
    conv.add_argument("--reference-nf", type=int, default=None, help="reference node count (>= 4 max Nf)")
    add("poles", "sphere pole atlas and predicted rate", _cmd_poles)
    scan = add("scan", "p(omega) inverse-norm scan on the mesh", _cmd_scan)
    scan.add_argument("--omega-axis", required=True, help="e.g. imag:0.5:3:0.05")
    scan.add_argument("--refine", action="store_true", help="locate the largest peak to 1e-5")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        paths = args.func(args, config)
    except (ConfigError, FileNotFoundError, ValueError, ArithmeticError) as exc:
        print(f"cqwave: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cqwave: I/O error: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(f"  {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
