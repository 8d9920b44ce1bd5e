"""Command line entry point: ``replicator {run,converge,pde-check,cost-table,presets}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex
from .errors import ConfigError, ReplicatorError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="replicator", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, sim=True):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--preset", help="built-in preset name (see `presets`)")
        sp.add_argument("--out", help="output directory")
        if sim:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--paths", type=int)
            sp.add_argument("--grid-n", type=int)
            sp.add_argument("--gamma", type=float)
            sp.add_argument("--workers", type=int)

    common(sub.add_parser("run", help="Monte Carlo run with report.csv and summary.txt"))
    c = sub.add_parser("converge", help="replication error against the number of steps")
    common(c)
    c.add_argument("--n-list", default="512,1024,2048,4096", help="comma-separated step counts")
    common(sub.add_parser("pde-check", help="finite-difference H against closed forms"), sim=False)
    t = sub.add_parser("cost-table", help="closed-form optimal costs")
    common(t, sim=False)
    sub.add_parser("presets", help="list built-in presets")
    return p


def _configs(args) -> list:
    if args.config and args.preset:
        raise ConfigError(["give either --config or --preset, not both"])
    if args.config:
        cfg = ex.load_config(args.config)
    elif args.preset:
        cfg = ex.preset(args.preset)
    else:
        return []
    if hasattr(args, "seed"):
        cfg = ex.with_overrides(cfg, seed=args.seed, paths=args.paths, grid_n=args.grid_n,
                                gamma=args.gamma, workers=args.workers)
    return [cfg]


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        if args.verb == "presets":
            for name in ex.preset_names():
                print(f"{name:16s} {ex.PRESETS[name]['description']}")
            return 0
        cfgs = _configs(args)
        if args.verb == "cost-table":
            cfgs = cfgs or [ex.preset(n) for n in ex.preset_names()]
            header, rows = ex.cost_table(cfgs, out=args.out)
            print(",".join(header))
            for r in rows:
                print(",".join(ex.fmt(v) for v in r))
            return 0
        if not cfgs:
            raise ConfigError(["--config or --preset is required"])
        cfg = cfgs[0]
        if args.verb == "run":
            outcome = ex.run(cfg, out=args.out)
            print(outcome.files[1].read_text(), end="")
            failures = outcome.failures
        elif args.verb == "converge":
            n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
            rows, ratios, failures = ex.converge(cfg, n_list, out=args.out)
            for i, r in enumerate(rows):
                extra = "" if i == 0 else f"  ratio {ratios[i - 1]:.3f}"
                print(f"N={r.grid_n:6d}  mean gap^2 {r.mean_gap_sq:.4e}{extra}")
        else:
            header, rows, failures = ex.pde_check(cfg, out=args.out)
            print(",".join(header))
            for r in rows:
                print(",".join(ex.fmt(v) for v in r))
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except (ReplicatorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for f in failures:
        print(f"threshold failed: {f}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
