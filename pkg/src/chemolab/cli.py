"""Command-line entry point: ``chemolab {run,sweep,verify,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config, parse_sweep
from .harness import SUITES, render_report, run_scenario, run_sweep, verify_suite

OUT_ENV = "CHEMOLAB_OUT"
log = logging.getLogger("chemolab")


def _out_dir(args, fallback: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, fallback))


def _with_seed(cfg, seed):
    if seed is None:
        return cfg
    from dataclasses import replace
    return replace(cfg, seed=seed, raw={**cfg.raw, "seed": seed})


def cmd_run(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    out = _out_dir(args, cfg.output.path)
    res = run_scenario(cfg, out)
    print(f"regime={res.regime.tag.value} status={res.status} steps={res.trace.steps} "
          f"plateau={res.plateau:.4f} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    spec = parse_sweep(Path(args.config).read_bytes())
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, base=_with_seed(spec.base, args.seed))
    out = _out_dir(args, spec.base.output.path)
    rows, ok = run_sweep(spec, parallelism=args.parallel, out_dir=out)
    for row in rows:
        print("  ".join(f"{k}={v}" for k, v in row.items()))
    print("sweep: all expected tags matched" if ok else "sweep: expected-tag MISMATCH")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    out = _out_dir(args, cfg.output.path)
    suites = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for name in suites:
        report, passed = verify_suite(name, cfg, out)
        ok = ok and passed
        print(f"{name}: {'PASS' if passed else 'FAIL'}")
        if args.verbose:
            print(json.dumps(report, indent=2, default=str))
    return 0 if ok else 1


def cmd_report(args) -> int:
    print(render_report(_out_dir(args, "runs")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemolab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", default=None,
                       help=f"output directory (default: ${OUT_ENV} or output.path)")
        return p

    p = common(sub.add_parser("run", help="run one simulation"))
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = common(sub.add_parser("sweep", help="run a parameter sweep"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("verify", help="run a verification suite"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("report", help="tabulate stored traces"), config=False)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
