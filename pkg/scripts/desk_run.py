"""Desk-scale 0-vs-1 run over several seeds; prints per-seed metrics and mean±std.

    python scripts/desk_run.py --config configs/desk.json --seeds 0 1 2
    python scripts/desk_run.py --config configs/desk.json --search   # also compare a searched genome
"""

import argparse
import dataclasses
import json
import logging

from hqcc import experiments, harness
from hqcc.config import load_config
from hqcc.metrics import format_pm

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/desk.json")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--search", action="store_true", help="also run the architecture search per seed")
    ap.add_argument("--out", help="directory for per-seed JSON results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = load_config(args.config)
    if args.search:
        summary = experiments.random_vs_search(cfg, args.seeds, args.out)
        for row in summary["rows"]:
            print(f"seed {row['seed']}: random {row['random']['accuracy']:.1f}%  search {row['search']['accuracy']:.1f}%")
        print("random:", format_pm([r["random"]["accuracy"] for r in summary["rows"]]))
        print("search:", format_pm([r["search"]["accuracy"] for r in summary["rows"]]))
    else:
        records = []
        for seed in args.seeds:
            run = dataclasses.replace(cfg, seed=seed, genome_seed=seed)
            rec = experiments.train_and_evaluate(run, harness.fixed_genome(run), seed)
            print(f"seed {seed}:", json.dumps(rec, sort_keys=True))
            records.append(rec)
        for key in ("accuracy", "recall", "f1", "auc"):
            print(f"{key}: {format_pm([r[key] for r in records], 4)}")
