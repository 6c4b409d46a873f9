"""Command-line entry point: ``dystasim <subcommand> ...``.

Exit codes: 0 success, 1 simulation or input-data error, 2 invalid config or usage.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .baselines import SCHEDULERS
from .config import ConfigError
from .fixtures import FIXTURE_KINDS, gen_fixture
from .harness import CellError, load_pool, run_experiment
from .predictor import CoeffStrategy, eval_rmse
from .profile import UnknownModelError, build_profiles, load_profiles
from .workload import TraceError, group_by_key, load_traces

OUT_ENV = "DYSTASIM_OUT"
log = logging.getLogger("dystasim")


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be integers: {text!r}") from None


def _load_config(args) -> cfgmod.ScenarioConfig:
    cfg = cfgmod.load(args.config)
    if getattr(args, "scheduler", None):
        cfg.schedulers = list(args.scheduler)
    if getattr(args, "seed_override", None):
        cfg.seeds = args.seed_override
    cfg.validate()
    return cfg


def _out_dir(args, cfg: cfgmod.ScenarioConfig | None) -> Path | None:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_ENV)
    if env and cfg is not None:
        return Path(env) / Path(cfg.output_dir).name
    return None


def cmd_run(args) -> int:
    cfg = _load_config(args)
    res = run_experiment(cfg, _out_dir(args, cfg), jobs=args.jobs)
    print(f"{len(res.reports)} cells -> {res.out_dir}")
    for r in res.reports:
        print(f"{r.scheduler:>18} M={r.slo_multiplier:<6g} rate={r.arrival_rate:<6g} seed={r.seed:<3} "
              f"antt={r.antt:.4f} violation={r.violation_rate:.4f} stp={r.stp:.3f}")
    return 0


def cmd_rmse(args) -> int:
    if args.config:
        cfg = cfgmod.load(args.config)
        traces, profiles = load_pool(cfg)
    elif args.traces:
        traces = load_traces(args.traces)
        profiles = load_profiles(args.profiles) if args.profiles else build_profiles(traces)
    else:
        print("rmse needs --config or --traces", file=sys.stderr)
        return 2
    strategies = [CoeffStrategy.average_all(), CoeffStrategy.last_n(args.last_n), CoeffStrategy.last_one()]
    rows = []
    for key, group in sorted(group_by_key(traces).items()):
        for st in strategies:
            rows.append((key.model_name, key.pattern.value, str(st), eval_rmse(group, profiles, st, args.alpha)))
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("model", "pattern", "strategy", "rmse"))
        for m, p, s, v in rows:
            w.writerow((m, p, s, repr(v)))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_fixture(args) -> int:
    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "fixtures")) / args.kind
    gen_fixture(args.kind, out)
    print(f"wrote {args.kind} fixture to {out}")
    return 0


def cmd_validate(args) -> int:
    traces = load_traces(args.traces)
    groups = group_by_key(traces)
    for key, group in sorted(groups.items()):
        print(f"{key}: {len(group)} samples, {group[0].num_layers} layers")
    if args.profiles:
        profiles = load_profiles(args.profiles)
        missing = [str(k) for k in groups if k not in profiles]
        if missing:
            print(f"no profile for: {', '.join(missing)}", file=sys.stderr)
            return 1
        for k, g in groups.items():
            if profiles[k].num_layers != g[0].num_layers:
                print(f"{k}: profile has {profiles[k].num_layers} layers, traces have {g[0].num_layers}",
                      file=sys.stderr)
                return 1
    print(f"ok: {len(traces)} traces")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dystasim", description="Sparse multi-DNN scheduling simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, helptext in (("run", "run one scenario config"), ("sweep", "run a sweep config")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", help=f"output directory (default: config output_dir, or ${OUT_ENV})")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--seed-override", type=_seed_list, help="comma-separated seeds")
        sp.add_argument("--scheduler", action="append", choices=SCHEDULERS,
                        help="run only this scheduler (repeatable)")
        sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("rmse", help="remaining-latency prediction error per strategy")
    sp.add_argument("--config")
    sp.add_argument("--traces")
    sp.add_argument("--profiles")
    sp.add_argument("--last-n", type=int, default=3)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--out", help="CSV path (default stdout)")
    sp.set_defaults(func=cmd_rmse)

    sp = sub.add_parser("fixture", help="generate a fixture set")
    sp.add_argument("kind", choices=FIXTURE_KINDS)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fixture)

    sp = sub.add_parser("validate-traces", help="check a trace CSV (and optionally its profiles)")
    sp.add_argument("traces")
    sp.add_argument("--profiles")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return 2
    except CellError as e:
        print(f"simulation failed: {e}", file=sys.stderr)
        return 1
    except (TraceError, UnknownModelError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
