"""Command line entry point: ``hqcc {train,search,eval,export-genome,inspect-circuit}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .circuit import GenomeError, compile_genome, deserialize_genome, describe, random_genome, serialize_genome
from .config import ConfigError, load_config
from .data import DataError
from .harness import CheckpointError
from .metrics import format_pm

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CHECKPOINT = 0, 2, 3, 4

log = logging.getLogger("hqcc")


def _read_genome(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return deserialize_genome(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read genome {path}: {e}") from None
    except GenomeError as e:
        raise ConfigError(f"genome {path}: {e}") from None


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_train(args):
    cfg = load_config(args.config)
    if args.resume:
        trainer = harness.load_checkpoint(args.resume)
        genome = trainer.net.genome
    else:
        trainer = None
        genome = _read_genome(args.genome) if args.genome else harness.fixed_genome(cfg)
    if genome.n_qubits != cfg.model.n_qubits or genome.n_layers < 1:
        raise ConfigError(f"genome has {genome.n_qubits} qubits, model.window needs {cfg.model.n_qubits}")
    train, test = harness.load_task(cfg)
    epochs = args.epochs if args.epochs is not None else cfg.train.epochs
    if trainer is None:
        trainer = harness.Trainer.fresh(cfg, genome)
    while trainer.epoch < epochs:
        history = harness.train_model(cfg, genome, train, test, epochs=trainer.epoch + 1,
                                      log_path=args.log, trainer=trainer)
        entry = history[-1]
        log.info("epoch %d loss %.4f acc %.2f", entry["epoch"], entry["train_loss"], entry["accuracy"])
        if args.checkpoint:
            harness.save_checkpoint(trainer, args.checkpoint)
    print(json.dumps(trainer.history[-1] if trainer.history else {}, sort_keys=True))
    return EXIT_OK


def cmd_search(args):
    cfg = load_config(args.config)
    if args.iterations is not None:
        cfg.search.iterations = args.iterations
    train, _ = harness.load_task(cfg)
    ctrl = harness.new_controller(cfg)
    best, report = harness.architecture_search(cfg, train, log_path=args.log, controller=ctrl)
    if args.report:
        _write(args.report, json.dumps(report, sort_keys=True, indent=1) + "\n")
    _write(args.out, serialize_genome(best))
    if args.controller:
        _write(args.controller, harness.dumps_controller(ctrl))
    log.info("best reward %.4f", report["best_reward"])
    return EXIT_OK


def cmd_eval(args):
    cfg = load_config(args.config)
    records = []
    for path in args.checkpoint:
        trainer = harness.load_checkpoint(path)
        _, test = harness.load_task(cfg, seed=trainer.cfg.seed)
        records.append(harness.evaluate(cfg, trainer, test))
    if len(records) == 1:
        print(json.dumps(records[0], sort_keys=True))
    else:
        agg = harness.aggregate(records)
        for k, v in agg.items():
            print(f"{k}: {format_pm([r[k] for r in records], 4)}")
    return EXIT_OK


def cmd_export_genome(args):
    if args.checkpoint:
        genome = harness.load_checkpoint(args.checkpoint).net.genome
    else:
        genome = random_genome(args.qubits, args.layers, args.seed)
    _write(args.out, serialize_genome(genome))
    return EXIT_OK


def cmd_inspect(args):
    genome = _read_genome(args.genome)
    print(describe(compile_genome(genome)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hqcc", description="Hybrid quantum-classical classifier with circuit search")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a classifier with a fixed genome")
    t.add_argument("--config", required=True)
    t.add_argument("--genome", help="genome file; default: random genome from config genome_seed")
    t.add_argument("--resume", help="continue from this checkpoint")
    t.add_argument("--epochs", type=int, help="override train.epochs (total)")
    t.add_argument("--checkpoint", help="write a checkpoint here after every epoch")
    t.add_argument("--log", help="append metrics lines to this file")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("search", help="controller-driven architecture search")
    s.add_argument("--config", required=True)
    s.add_argument("--iterations", type=int)
    s.add_argument("--out", default="-", help="best genome output (default stdout)")
    s.add_argument("--report")
    s.add_argument("--log")
    s.add_argument("--controller", help="write the trained controller checkpoint here")
    s.set_defaults(func=cmd_search)

    e = sub.add_parser("eval", help="evaluate checkpoint(s); several give mean±std")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint", required=True, action="append")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("export-genome", help="write a genome from a checkpoint or a seed")
    src = x.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--seed", type=int)
    x.add_argument("--qubits", type=int, default=9)
    x.add_argument("--layers", type=int, default=5)
    x.add_argument("--out", default="-")
    x.set_defaults(func=cmd_export_genome)

    i = sub.add_parser("inspect-circuit", help="print the compiled gate list of a genome")
    i.add_argument("genome")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except GenomeError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
