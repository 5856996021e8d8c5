"""Command line entry point ``qprob``.

Exit codes: 0 everything passed, 1 a check failed, 2 the config was
rejected, 3 a solver or runtime error.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import ensure_writable, load_config
from .errors import ConfigError, QprobError
from .report import write_json, write_meta
from . import runs

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="qprob", description="Verification and evolution runs.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the verification checks of a Verify config")
    v.add_argument("config")
    v.add_argument("--out", help="report path (default: outputs.report or report.json)")
    v.add_argument("--seed", type=int, default=None)

    e = sub.add_parser("evolve", help="evolve an Evolve or ManyBody config")
    e.add_argument("config")
    e.add_argument("--out", help="output directory (default: outputs.directory or qprob_out)")
    e.add_argument("--seed", type=int, default=None)

    for name, helptext in (("dispersion", "measure omega(k) for a Dispersion config"),
                           ("classical", "run the sigma/hbar localization scan")):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("config")
        q.add_argument("--out", help="output directory (default: outputs.directory or qprob_out)")
    return p


def _out_dir(args, cfg):
    return Path(args.out or cfg.outputs.directory or "qprob_out")


def _verify(args, cfg):
    out = ensure_writable(args.out or cfg.outputs.report or "report.json")
    t0 = time.perf_counter()
    report = runs.run_verify(cfg, seed=args.seed)
    write_json(out, report)
    write_meta(out, elapsed=time.perf_counter() - t0)
    s = report["summary"]
    for r in report["records"]:
        if not r["passed"]:
            where = f"[{r['fixture']}]" if r["fixture"] else ""
            print(f"FAIL {r['check']}{where}: {r['error'] or 'margin ' + repr(r['margin'])}",
                  file=sys.stderr)
    print(f"{s['n_records'] - s['n_failed']}/{s['n_records']} checks passed -> {out}")
    return EXIT_OK if s["passed"] else EXIT_CHECK_FAILED


def _evolve(args, cfg):
    out = ensure_writable(_out_dir(args, cfg))
    t0 = time.perf_counter()
    summary = runs.run_evolve(cfg, out, seed=args.seed)
    write_meta(out / "summary.json", elapsed=time.perf_counter() - t0)
    print(f"{summary['snapshot_count']} snapshots, norm drift {summary['norm_drift']!r} -> {out}")
    return EXIT_OK


def _table(runner, json_name):
    def command(args, cfg):
        out = ensure_writable(_out_dir(args, cfg))
        t0 = time.perf_counter()
        summary = runner(cfg, out)
        write_meta(out / json_name, elapsed=time.perf_counter() - t0)
        print(f"{len(summary['rows'])} rows, passed={summary['passed']} -> {out}")
        return EXIT_OK if summary["passed"] else EXIT_CHECK_FAILED
    return command


COMMANDS = {
    "verify": _verify,
    "evolve": _evolve,
    "dispersion": _table(runs.run_dispersion, "dispersion.json"),
    "classical": _table(runs.run_classical_scan, "classical.json"),
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except runs.RunFailed as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (QprobError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
