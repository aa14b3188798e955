"""Optional full-size binary protocol (hours of CPU): 28x28, 1000/200, 30 epochs, search enabled.

Needs the four standard MNIST IDX files (train/t10k, optionally .gz) in --mnist.
``--subset`` instead runs the same protocol on the bundled 5000-image sample
(800 train / 200 test per pair, since it holds only 500 images per class).

    python scripts/full_scale.py --mnist /path/to/mnist --out results/full
    python scripts/full_scale.py --subset --iterations 5 --genome-batch 4 --inner-epochs 2
"""

import argparse
import json
import logging
import os

from hqcc import config, experiments, mnist_subset

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--mnist")
    src.add_argument("--subset", action="store_true")
    ap.add_argument("--classes", type=int, nargs=2, default=[0, 5])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--iterations", type=int, default=20)
    ap.add_argument("--genome-batch", type=int, default=8)
    ap.add_argument("--inner-epochs", type=int, default=5)
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    search = {"iterations": args.iterations, "genome_batch": args.genome_batch, "inner_epochs": args.inner_epochs}
    if args.mnist:
        s = experiments.full_scale(args.mnist, args.seeds, tuple(args.classes), args.out, **search)
    else:
        cfg = config.full_preset(tuple(args.classes))
        cfg.data.images, cfg.data.labels = mnist_subset.prepare("data")
        cfg.data.n_train = 800
        for k, v in search.items():
            setattr(cfg.search, k, v)
        config.validate(cfg)
        s = experiments.random_vs_search(cfg, args.seeds, args.out)
    print(json.dumps({k: v for k, v in s.items() if k != "rows"}, indent=1, sort_keys=True))
