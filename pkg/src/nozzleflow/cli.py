"""Command-line client.

Thin layer over the run functions (or over a running HTTP service when
--server is given): parses the config file, dispatches the subcommand,
writes CSVs plus a key=value report into --out-dir, and echoes the resolved
config to config.resolved.

Exit codes: 0 success, 1 config error, 2 typed solver error.
"""

import argparse
import sys
from pathlib import Path

from .config import config_schema, parse_config, parse_config_text
from .errors import ConfigError, NozzleFlowError, SolverError
from .runs import (
    report_text, run_background, run_solve, run_solve_linear, run_sweep,
    run_verify,
)


def _schema_epilog():
    lines = ["config keys (key = value per line, # comments):"]
    for key, tname, default, desc in config_schema():
        lines.append(f"  {key:24s} {tname:9s} default={default!r}  {desc}")
    lines += [
        "",
        "output files per subcommand:",
        "  background:   background.csv (x1,n,u_b,rho_b,c_b,mach,tau,k_b,alpha,d1k_b)",
        "  verify:       conditions.txt, coefficients.csv (x1,x2,k,b,a,alpha_h,rhs)",
        "  solve-linear: field.csv (x1,x2,value)",
        "  solve:        solution.csv, mach.csv (x1,x2,value), sonic.csv (x2,x1_sonic)",
        "  sweep:        sweep.csv (one row per eps)",
        "  all:          report.txt (key = value), config.resolved",
    ]
    return "\n".join(lines)


def build_parser():
    p = argparse.ArgumentParser(
        prog="nozzleflow",
        description="transonic nozzle potential-flow solver",
        epilog=_schema_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", type=Path, default=None,
                   help="config file (defaults apply when omitted)")
    p.add_argument("--out-dir", type=Path, default=None,
                   help="output directory (overrides run.out_dir)")
    p.add_argument("--server", default=None,
                   help="base URL of a running service; the CLI becomes a "
                        "pure HTTP client")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("background", help="choked quasi-1D background flow")
    sub.add_parser("verify", help="assemble coefficients and check hypotheses")
    sl = sub.add_parser("solve-linear", help="one frozen-coefficient solve")
    sl.add_argument("--rhs", choices=("h", "g"), default="h",
                    help="source: h(x1)*1 or the entry-lift term -h g''")
    sl.add_argument("--coeffs", type=Path, default=None,
                    help="coefficients.csv from a verify run (otherwise the "
                         "background set is assembled fresh)")
    sub.add_parser("solve", help="full nonlinear transonic solve")
    sw = sub.add_parser("sweep", help="stability-ratio sweep over amplitudes")
    sw.add_argument("--eps-list", default="1e-3,3e-4,1e-4",
                    help="comma-separated amplitudes")
    return p


def _load_config(args):
    if args.config is not None:
        cfg = parse_config(args.config)
    else:
        cfg = parse_config_text("")
    return cfg


def _write(out_dir, name, text):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def _run_local(args, cfg):
    if args.command == "background":
        res = run_background(cfg)
        return {"background.csv": res.csv}, res.report, None
    if args.command == "verify":
        res = run_verify(cfg)
        return (
            {"conditions.txt": res.table, "coefficients.csv": res.coefficients_csv},
            res.report,
            res.table,
        )
    if args.command == "solve-linear":
        coeffs = args.coeffs.read_text() if args.coeffs else None
        res = run_solve_linear(cfg, rhs_mode=args.rhs,
                               coefficients_csv=coeffs)
        return {"field.csv": res.field_csv}, res.report, None
    if args.command == "solve":
        res = run_solve(cfg)
        return (
            {"solution.csv": res.solution_csv, "mach.csv": res.mach_csv,
             "sonic.csv": res.sonic_csv},
            res.report,
            None,
        )
    if args.command == "sweep":
        eps_list = [float(s) for s in args.eps_list.split(",") if s.strip()]
        res = run_sweep(cfg, eps_list)
        return {"sweep.csv": res.table_csv}, res.report, res.table_csv
    raise AssertionError(f"unhandled command {args.command}")


def _run_remote(args, cfg):
    import httpx

    payload = {"config": {k: v for k, v in cfg.values.items()
                          if k not in cfg.defaulted}}
    payload["config"].update(
        {f"g.mode.{m}": amp for m, amp in cfg.g_modes.items()}
    )
    if "solver.eps_schedule" in payload["config"]:
        payload["config"]["solver.eps_schedule"] = ",".join(
            repr(e) for e in payload["config"]["solver.eps_schedule"]
        )
    route = {"background": "/background", "verify": "/verify",
             "solve-linear": "/solve-linear", "solve": "/solve",
             "sweep": "/sweep"}[args.command]
    if args.command == "sweep":
        payload["eps_list"] = [float(s) for s in args.eps_list.split(",")]
    if args.command == "solve-linear":
        payload["rhs_mode"] = args.rhs
    resp = httpx.post(args.server.rstrip("/") + route, json=payload,
                      timeout=600.0)
    if resp.status_code == 400:
        raise ConfigError(resp.json().get("message", "config error"))
    if resp.status_code == 422:
        body = resp.json()
        raise SolverError(f"{body.get('error_type')}: {body.get('message')}")
    resp.raise_for_status()
    body = resp.json()
    files = {}
    stdout_text = None
    if args.command == "background":
        files["background.csv"] = body["csv"]
    elif args.command == "verify":
        files["conditions.txt"] = body["table"]
        files["coefficients.csv"] = body["coefficients_csv"]
        stdout_text = body["table"]
    elif args.command == "solve-linear":
        files["field.csv"] = body["field_csv"]
    elif args.command == "solve":
        files["solution.csv"] = body["solution_csv"]
        files["mach.csv"] = body["mach_csv"]
        files["sonic.csv"] = body["sonic_csv"]
    elif args.command == "sweep":
        files["sweep.csv"] = body["table_csv"]
        stdout_text = body["table_csv"]
    return files, body["report"], stdout_text


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        out_dir = args.out_dir or Path(cfg["run.out_dir"])
        if args.server:
            files, report, stdout_text = _run_remote(args, cfg)
        else:
            files, report, stdout_text = _run_local(args, cfg)
        for name, text in files.items():
            _write(out_dir, name, text)
        _write(out_dir, "report.txt", report_text(report))
        _write(out_dir, "config.resolved", "\n".join(cfg.as_lines()) + "\n")
        if stdout_text:
            sys.stdout.write(stdout_text)
        sys.stdout.write(f"[{args.command}] ok; outputs in {out_dir}\n")
        return 0
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except SolverError as exc:
        sys.stderr.write(f"solver error: {type(exc).__name__}: {exc}\n")
        return 2
    except NozzleFlowError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
