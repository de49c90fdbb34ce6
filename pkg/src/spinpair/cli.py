"""Command-line entry point: spinpair <task> [--config ...] [overrides]."""
from __future__ import annotations

import argparse
import sys

from .config import default_config, load_config, save_config
from .harness import TASKS, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinpair",
        description="Simulation and blind-estimation experiments for a coupled qubit pair.",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} experiment")
        p.add_argument("--config", help="experiment config file (defaults used if omitted)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", required=True, help="output directory for CSV files")
        p.add_argument("--N", type=int, dest="n_states", help="states per campaign")
        p.add_argument("--K", type=int, dest="preps", help="preparations per state")
        p.add_argument("--runs", type=int, help="independent runs")
        p.add_argument("--workers", type=int, help="process-pool size (default: cpu count)")
        if task == "classify":
            p.add_argument("--refs", help="reference vectors CSV (class_id, components...)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config) if args.config else default_config()
    cfg = cfg.with_overrides(
        seed=args.seed, n_states=args.n_states, preps_per_state=args.preps, runs=args.runs
    )

    if args.task == "classify" and getattr(args, "refs", None):
        import os

        from .classify_task import run_classify_task

        os.makedirs(args.out, exist_ok=True)
        report = run_classify_task(cfg, args.out, references_csv=args.refs)
        reports = [report]
    else:
        reports = run_experiment(cfg, args.task, args.out, workers=args.workers)

    save_config(cfg, f"{args.out}/config.txt")
    for rep in reports:
        jxy = "-" if rep.nrmse_jxy is None else f"{rep.nrmse_jxy:.3e}"
        jz = "-" if rep.nrmse_jz is None else f"{rep.nrmse_jz:.3e}"
        print(
            f"{rep.task}: N={rep.n_states} K={rep.preps_per_state} runs={rep.runs} "
            f"nrmse_jxy={jxy} nrmse_jz={jz} rejections={rep.rejections} "
            f"wall={rep.wall_seconds:.1f}s"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
