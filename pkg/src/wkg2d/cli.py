"""Command-line surface.

Subcommands: run, verify-identities, convergence, blowup-scan, fit,
report.  Exit codes are enumerated in --help so scripts can branch on
failure class without parsing messages.
"""

from __future__ import annotations

import argparse
import json
import shutil
import subprocess
import sys
from pathlib import Path

from . import config as configmod
from . import identities, runner
from ._version import __version__

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORTED = 3
EXIT_IDENTITY = 4
EXIT_ARTIFACTS = 5

_EPILOG = """exit codes:
  0  success
  2  bad usage, malformed or invalid configuration
  3  run aborted (boundary leak)
  4  identity check failed
  5  missing or unreadable run artifacts
"""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wkg2d",
        description="Finite-difference laboratory for coupled "
                    "wave/Klein-Gordon systems on 2d grids.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_default=None):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file")
        p.add_argument("--out", type=Path, default=out_default,
                       help="output directory")
        p.add_argument("--model", default=None,
                       help="model kind override")
        p.add_argument("--eps", type=float, default=None,
                       help="data amplitude override")
        p.add_argument("--grid-n", type=int, default=None,
                       help="grid points per axis (odd)")
        p.add_argument("--t-max", type=float, default=None,
                       help="final time")

    p_run = sub.add_parser("run", help="execute one run and write artifacts",
                           epilog=_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_ver = sub.add_parser("verify-identities",
                           help="analytic identity suite; nonzero exit on "
                                "any failure")
    p_ver.add_argument("--out", type=Path, default=Path("."),
                       help="directory for identity_report.json")
    p_ver.add_argument("--points", type=int, default=1000)
    p_ver.set_defaults(func=_cmd_verify)

    p_conv = sub.add_parser("convergence",
                            help="manufactured-solution grid ladder")
    p_conv.add_argument("--out", type=Path, default=Path("."))
    p_conv.add_argument("--model", default=None,
                        help="mms-wave or mms-kg (default both)")
    p_conv.set_defaults(func=_cmd_convergence)

    p_scan = sub.add_parser("blowup-scan", help="amplitude ladder")
    p_scan.add_argument("--out", type=Path, default=Path("."))
    p_scan.add_argument("--model", default="swapped-ii")
    p_scan.add_argument("--amps", default="0.5,1.0,2.0",
                        help="comma-separated amplitudes")
    p_scan.add_argument("--eps", type=float, default=1.0,
                        help="base amplitude multiplier")
    p_scan.add_argument("--t-max", type=float, default=50.0)
    p_scan.add_argument("--grid-n", type=int, default=513)
    p_scan.set_defaults(func=_cmd_scan)

    p_fit = sub.add_parser("fit",
                           help="recompute fits.json from a run directory")
    p_fit.add_argument("--run", type=Path, required=True)
    p_fit.set_defaults(func=_cmd_fit)

    p_rep = sub.add_parser("report",
                           help="summarize a run directory; invokes the "
                                "external reporter if installed")
    p_rep.add_argument("--run", type=Path, required=True)
    p_rep.add_argument("--out", type=Path, default=None)
    p_rep.set_defaults(func=_cmd_report)
    return parser


def _load_config(args) -> configmod.RunConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise configmod.MalformedConfig(f"{args.config}: {exc}") from exc
    if getattr(args, "model", None):
        data["model"] = args.model
    if getattr(args, "eps", None) is not None:
        data["eps"] = args.eps
    if getattr(args, "t_max", None) is not None:
        data["t_max"] = args.t_max
    if getattr(args, "grid_n", None) is not None:
        grid = dict(data.get("grid", {}))
        grid["n"] = args.grid_n
        data["grid"] = grid
    return configmod.from_dict(data)


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out if args.out is not None else Path("run-out")
    output = runner.execute_run(cfg, out_dir)
    bu = output.result.blowup
    status = f"blow-up at t={bu.t_star:.4g} ({bu.trigger})" if bu.detected \
        else f"reached t={output.result.t_end:.4g}"
    print(f"{cfg.model}: {status}, {output.result.steps} steps, "
          f"{output.manifest['records_complete']} curved slices -> {out_dir}")
    if not output.result.ok:
        return EXIT_ABORTED
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = identities.run_analytic_suite(n_points=args.points)
    args.out.mkdir(parents=True, exist_ok=True)
    identities.write_report(results, args.out / "identity_report.json")
    failed = 0
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        print(f"{tag} {res.name}: max residual {res.max_residual:.3e} "
              f"(tol {res.tol:g})")
        failed += 0 if res.passed else 1
    return EXIT_OK if failed == 0 else EXIT_IDENTITY


def _cmd_convergence(args) -> int:
    kinds = [args.model] if args.model else ["mms-wave", "mms-kg"]
    payload = {}
    for kind in kinds:
        if kind not in ("mms-wave", "mms-kg"):
            print(f"convergence needs a forced kind, got {kind!r}",
                  file=sys.stderr)
            return EXIT_CONFIG
        payload[kind] = runner.mms_convergence(kind)
        orders = ", ".join(f"{o:.3f}" for o in payload[kind]["orders"])
        print(f"{kind}: observed orders {orders}")
    args.out.mkdir(parents=True, exist_ok=True)
    runner.write_json(args.out / "convergence.json", payload)
    return EXIT_OK


def _cmd_scan(args) -> int:
    amps = [float(a) for a in args.amps.split(",") if a.strip()]
    if not amps:
        print("--amps needs at least one value", file=sys.stderr)
        return EXIT_CONFIG
    args.out.mkdir(parents=True, exist_ok=True)
    table = runner.blowup_scan(args.model, amps, eps=args.eps,
                               t_max=args.t_max, n=args.grid_n,
                               out_path=args.out / "blowup.json")
    for row in table["rows"]:
        star = "none" if row["t_star"] is None else f"{row['t_star']:.4g}"
        print(f"eps={row['eps']:g}: t_star={star}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    try:
        runner.recompute_fits(args.run)
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_ARTIFACTS
    print(f"fits.json and criticality.json refreshed in {args.run}")
    return EXIT_OK


def _summary_rows(run_dir: Path) -> list:
    with open(run_dir / "fits.json", encoding="utf-8") as fh:
        fits = json.load(fh)
    rows = []
    decay_part = fits.get("decay", {})
    for name, entry in decay_part.get("trackers", {}).items():
        fit = entry.get("fit") or {}
        rows.append((name, fit.get("exponent", ""), fit.get("r_squared", ""),
                     "bounded" if entry.get("bounded") else "unbounded"))
    for name, fit in decay_part.get("energy_growth", {}).items():
        rows.append((name, fit.get("exponent", ""), fit.get("r_squared", ""),
                     "fit" if fit.get("valid") else "invalid"))
    for name, fit in fits.get("baselines", {}).items():
        rows.append((name, fit.get("exponent", ""), fit.get("r_squared", ""),
                     "fit" if fit.get("valid") else "invalid"))
    ineq = fits.get("energy_inequalities", {})
    if "all_held" in ineq:
        rows.append(("energy_inequalities", "", "",
                     "held" if ineq["all_held"] else "violated"))
    return rows


def _cmd_report(args) -> int:
    run_dir = args.run
    try:
        rows = _summary_rows(run_dir)
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_ARTIFACTS
    out_dir = args.out if args.out is not None else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["quantity,exponent,r_squared,status"]
    for q, e, r2, status in rows:
        lines.append(f"{q},{e},{r2},{status}")
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")
    print(f"summary.csv written to {out_dir}")
    reporter = shutil.which("reporter")
    if reporter:
        proc = subprocess.run([reporter, str(run_dir), "--out",
                               str(out_dir / "report")], check=False)
        if proc.returncode != 0:
            print("external reporter failed; summary.csv still written",
                  file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except configmod.ConfigError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_ARTIFACTS


if __name__ == "__main__":
    sys.exit(main())
