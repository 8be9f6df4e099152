"""Bytes per read, write and audit at several capacities, with residual growth.

Example:
    python3 scripts/bandwidth.py --n 64 256 1024 4096 --c 8
"""
import argparse
import json

from hhpor.bench import BenchConfig, format_table, run_bench


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[64, 4096])
    ap.add_argument("--c", type=int, default=8, help="challenges per level")
    ap.add_argument("--trials", type=int, default=32)
    ap.add_argument("--profile", default="toy")
    ap.add_argument("--m", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    cfg = BenchConfig(ns=tuple(args.n), c=args.c, trials=args.trials, profile=args.profile, m=args.m, seed=args.seed)
    rows = run_bench(cfg)
    print(json.dumps([r.as_dict() for r in rows], indent=2) if args.json else format_table(rows))


if __name__ == "__main__":
    main()
