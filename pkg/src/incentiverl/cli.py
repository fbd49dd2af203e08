"""Command-line interface.

Subcommands:
  run <config> [--seed S --seeds K --out DIR]   train seeds sequentially
  sweep <config> [--out DIR --workers W]        train seeds in parallel
  vectorfield [--eta1d V ...]                   exact-dynamics CSV export
  probe <checkpoint> [--episodes N]             scripted-opponent incentives
  oracle er <N> <M>                             optimal collective return

Exit codes: 0 success, 1 configuration error, 2 run divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import exact_ipd
from .config import ConfigError, load_config
from .envs import EnvError, er_optimal_return
from .harness import agent_from_checkpoint, probe_incentives, run_experiment, sweep


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.seeds is not None:
        config.seeds = args.seeds
    out_root = Path(args.out if args.out is not None else config.out)
    worst = 0
    for k in range(config.seeds):
        seed = config.seed + k
        out_dir = out_root / config.name / str(seed)
        log, status = run_experiment(config, seed=seed, out_dir=out_dir)
        tail = [r["collective_return"] for r in log.episodes()[-100:]]
        print(f"seed {seed}: {status}, final collective return {np.mean(tail):.4g}")
        if status != "ok":
            worst = 2
    return worst


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.seeds is not None:
        config.seeds = args.seeds
    out_root = args.out if args.out is not None else config.out
    results = sweep(config, out_root=out_root, max_workers=args.workers)
    worst = 0
    for r in results:
        print(f"seed {r['seed']}: {r['status']}, final collective return {r['final_collective']:.4g}")
        if r["status"] != "ok":
            worst = 2
    return worst


def _cmd_vectorfield(args) -> int:
    eta1c = np.linspace(args.eta1c_min, args.eta1c_max, args.grid)
    theta2 = np.linspace(args.theta2_min, args.theta2_max, args.grid)
    rows = exact_ipd.vector_field(
        eta1c, theta2, args.eta1d, alpha=args.alpha, beta=args.beta, gamma=args.gamma
    )
    csv = exact_ipd.vector_field_csv(rows)
    if args.out:
        Path(args.out).write_text(csv)
        print(f"wrote {len(rows)} grid points to {args.out}")
    else:
        sys.stdout.write(csv)
    return 0


def _cmd_probe(args) -> int:
    agent, config = agent_from_checkpoint(args.checkpoint)
    if not agent.gives_incentives:
        print("checkpointed agent has no incentive function", file=sys.stderr)
        return 1
    results = probe_incentives(
        agent, config, episodes=args.episodes, rng=np.random.default_rng(args.seed)
    )
    for kind in ("R", "C", "M"):
        mean, stderr = results[kind]
        print(f"{kind}: {mean:.4f} +/- {stderr:.4f}")
    return 0


def _cmd_oracle(args) -> int:
    if args.game != "er":
        print(f"unknown oracle {args.game!r}", file=sys.stderr)
        return 1
    print(f"{er_optimal_return(args.n, args.m):g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="incentiverl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train seeds sequentially")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="train seeds in parallel")
    p.add_argument("config")
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("vectorfield", help="export exact-dynamics update vectors as CSV")
    p.add_argument("--eta1d", type=float, default=0.0)
    p.add_argument("--eta1c-min", type=float, default=0.0)
    p.add_argument("--eta1c-max", type=float, default=3.0)
    p.add_argument("--theta2-min", type=float, default=0.05)
    p.add_argument("--theta2-max", type=float, default=0.95)
    p.add_argument("--grid", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_vectorfield)

    p = sub.add_parser("probe", help="measure a trained incentive function on scripted opponents")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("oracle", help="closed-form/brute-force reference values")
    p.add_argument("game", choices=["er"])
    p.add_argument("n", type=int)
    p.add_argument("m", type=int)
    p.set_defaults(func=_cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EnvError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
