"""Seed-repeated experiment drivers used by scripts/ and the optional full-scale check."""

from __future__ import annotations

import dataclasses
import json
import logging
import os

from . import config as config_mod
from . import harness
from .circuit import random_genome
from .metrics import mean_std

log = logging.getLogger("hqcc")

MNIST_FILES = {
    "images": "train-images-idx3-ubyte",
    "labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

# reference value for the 0-vs-5 binary task with a searched circuit, and the accepted band
REFERENCE_ACCURACY = 99.68
REFERENCE_TOLERANCE = 1.5


def mnist_paths(directory: str) -> dict:
    """Locate the four standard MNIST IDX files (optionally ``.gz``) in ``directory``."""
    out = {}
    for key, name in MNIST_FILES.items():
        for cand in (name, name + ".gz"):
            p = os.path.join(directory, cand)
            if os.path.exists(p):
                out[key] = p
                break
        else:
            raise FileNotFoundError(f"{name}[.gz] not found in {directory}")
    return out


def train_and_evaluate(cfg, genome, seed: int, log_path=None) -> dict:
    """Fresh model for ``seed``; trains ``cfg.train.epochs`` and returns the final test metrics."""
    run = dataclasses.replace(cfg, seed=seed)
    train, test = harness.load_task(run)
    trainer = harness.Trainer.fresh(run, genome)
    harness.train_model(run, genome, train, test, trainer=trainer, log_path=log_path)
    return harness.evaluate(run, trainer, test)


def random_vs_search(cfg, seeds=(0, 1, 2), out_dir=None) -> dict:
    """Per seed: a random genome and a searched genome, each trained from scratch and evaluated."""
    rows = []
    for seed in seeds:
        run = dataclasses.replace(cfg, seed=seed, genome_seed=seed)
        train, _ = harness.load_task(run)
        rand = random_genome(cfg.model.n_qubits, cfg.model.n_layers, seed)
        rand_rec = train_and_evaluate(run, rand, seed)
        log.info("seed %d random genome: %.2f%%", seed, rand_rec["accuracy"])
        best, report = harness.architecture_search(run, train)
        search_rec = train_and_evaluate(run, best, seed)
        log.info("seed %d searched genome: %.2f%% (reward %.3f)", seed, search_rec["accuracy"], report["best_reward"])
        rows.append({"seed": seed, "random": rand_rec, "search": search_rec, "search_report": report})
        if out_dir:
            with open(os.path.join(out_dir, f"seed{seed}.json"), "w", encoding="utf-8") as fh:
                json.dump(rows[-1], fh, sort_keys=True, indent=1)
    rand_m, rand_s = mean_std([r["random"]["accuracy"] for r in rows])
    srch_m, srch_s = mean_std([r["search"]["accuracy"] for r in rows])
    return {"rows": rows, "random": {"mean": rand_m, "std": rand_s}, "search": {"mean": srch_m, "std": srch_s}}


def full_scale(mnist_dir: str, seeds=(0, 1, 2), classes=(0, 5), out_dir=None, **search) -> dict:
    """Full-size binary protocol on real MNIST; returns summary plus the two pass/fail checks."""
    cfg = config_mod.full_preset(classes)
    for key, value in mnist_paths(mnist_dir).items():
        setattr(cfg.data, key, value)
    for key, value in search.items():
        setattr(cfg.search, key, value)
    config_mod.validate(cfg)
    summary = random_vs_search(cfg, seeds, out_dir)
    summary["within_tolerance"] = abs(summary["search"]["mean"] - REFERENCE_ACCURACY) <= REFERENCE_TOLERANCE
    summary["search_not_worse"] = summary["search"]["mean"] >= summary["random"]["mean"]
    return summary
