"""Training loop, architecture search, checkpoints and evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import config as config_mod
from .circuit import CircuitGenome, genome_from_dict, genome_to_dict, random_genome
from .cnn import AdamState, adam_step
from .config import ConfigError, RunConfig
from .controller import Controller, RewardBaseline
from .data import LabeledImageSet, downsample, load_idx, make_task, split_validation
from .metrics import EvalRecord, append_log, evaluate_record, mean_std
from .model import HybridNet

CHECKPOINT_FORMAT = "hqcc-checkpoint"
CHECKPOINT_VERSION = 1
CONTROLLER_FORMAT = "hqcc-controller"


class CheckpointError(ValueError):
    pass


def _seed(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))


# --- data -------------------------------------------------------------------

def load_task(cfg: RunConfig, seed: int | None = None):
    """Read the configured IDX files and build the (train, test) task."""
    d = cfg.data
    seed = cfg.seed if seed is None else seed
    pool = load_idx(d.images, d.labels, d.class_count)
    if d.test_images:
        test_pool = load_idx(d.test_images, d.test_labels, d.class_count)
        train, _ = make_task(pool, d.classes, d.n_train, 0, seed)
        test, _ = make_task(test_pool, d.classes, d.n_test, 0, seed + 1)
    else:
        train, test = make_task(pool, d.classes, d.n_train, d.n_test, seed)
    if d.downsample > 1:
        train, test = downsample(train, d.downsample), downsample(test, d.downsample)
    if train.images.shape[1:] != tuple(cfg.model.input_shape):
        raise ConfigError(
            f"model.input_shape: {tuple(cfg.model.input_shape)} but images are {train.images.shape[1:]}"
        )
    return train, test


# --- training ---------------------------------------------------------------

def evaluate_net(net: HybridNet, data: LabeledImageSet) -> dict:
    record = EvalRecord(net.predict_proba(data.images), data.labels)
    return evaluate_record(record, net.config.n_classes)


@dataclass
class Trainer:
    """Mutable training state; everything needed to resume lives here."""

    cfg: RunConfig
    net: HybridNet
    adam: AdamState
    rng: np.random.Generator
    epoch: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def fresh(cls, cfg: RunConfig, genome: CircuitGenome, seed: int | None = None) -> "Trainer":
        seed = cfg.seed if seed is None else seed
        net = HybridNet(cfg.model, genome, rng=_seed(seed, 1))
        return cls(cfg, net, AdamState(lr=cfg.train.lr), _seed(seed, 2))

    def run_epoch(self, train: LabeledImageSet, test: LabeledImageSet | None) -> dict:
        bs = self.cfg.train.batch_size
        order = self.rng.permutation(len(train))
        losses = []
        for s in range(0, len(order), bs):
            idx = order[s:s + bs]
            loss, grads = self.net.loss_and_grads(train.images[idx], train.labels[idx])
            adam_step(self.net.params, grads, self.adam)
            losses.append(loss * len(idx))
        self.epoch += 1
        entry = {"epoch": self.epoch, "train_loss": float(np.sum(losses) / len(order))}
        if test is not None:
            entry.update(evaluate_net(self.net, test))
        self.history.append(entry)
        return entry


def train_model(cfg: RunConfig, genome: CircuitGenome, train: LabeledImageSet, test: LabeledImageSet,
                *, epochs: int | None = None, log_path=None, trainer: Trainer | None = None,
                seed: int | None = None) -> list:
    """Adam over seeded shuffled mini-batches; returns the per-epoch metrics history.

    Pass ``trainer`` to continue from a loaded checkpoint; ``epochs`` is then the
    total target epoch count.
    """
    if len(train) == 0 or len(test) == 0:
        raise ValueError("train_model needs non-empty train and test sets")
    trainer = trainer or Trainer.fresh(cfg, genome, seed)
    total = cfg.train.epochs if epochs is None else epochs
    run_id = cfg.resolved_run_id()
    while trainer.epoch < total:
        entry = trainer.run_epoch(train, test)
        if log_path is not None:
            append_log(log_path, {"run_id": run_id, "task": cfg.task_name, "kind": "train", **entry})
    return trainer.history


# --- checkpoints --------------------------------------------------------------

def _arrays_to_doc(arrays: dict) -> dict:
    return {k: {"shape": list(np.shape(v)), "data": np.asarray(v, dtype=np.float64).ravel().tolist()}
            for k, v in sorted(arrays.items())}


def _arrays_from_doc(doc: dict) -> dict:
    out = {}
    for k, v in doc.items():
        data = np.asarray(v["data"], dtype=np.float64)
        if data.size != int(np.prod(v["shape"])):
            raise CheckpointError(f"array {k!r}: {data.size} values for shape {v['shape']}")
        out[k] = data.reshape(v["shape"])
    return out


def checkpoint_dict(trainer: Trainer) -> dict:
    a = trainer.adam
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config_mod.to_dict(trainer.cfg),
        "genome": genome_to_dict(trainer.net.genome),
        "params": _arrays_to_doc(trainer.net.params),
        "adam": _adam_doc(a),
        "rng": trainer.rng.bit_generator.state,
        "epoch": trainer.epoch,
        "history": trainer.history,
    }


def dumps_checkpoint(trainer: Trainer) -> str:
    return json.dumps(checkpoint_dict(trainer), sort_keys=True) + "\n"


def save_checkpoint(trainer: Trainer, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_checkpoint(trainer))


def loads_checkpoint(text: str) -> Trainer:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"checkpoint is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not an hqcc checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}")
    try:
        cfg = config_mod.from_dict(doc["config"])
        genome = genome_from_dict(doc["genome"])
        params = _arrays_from_doc(doc["params"])
        net = HybridNet(cfg.model, genome, params=params)
        expected = net._init_params(np.random.default_rng(0))
        for k, v in expected.items():
            if k not in params or params[k].shape != v.shape:
                raise CheckpointError(f"parameter {k!r} missing or mis-shaped")
        ad = doc["adam"]
        adam = AdamState(lr=ad["lr"], beta1=ad["beta1"], beta2=ad["beta2"], eps=ad["eps"], t=ad["t"],
                         m=_arrays_from_doc(ad["m"]), v=_arrays_from_doc(ad["v"]))
        bitgen = getattr(np.random, doc["rng"]["bit_generator"])()
        bitgen.state = doc["rng"]
        return Trainer(cfg, net, adam, np.random.Generator(bitgen), int(doc["epoch"]), list(doc["history"]))
    except CheckpointError:
        raise
    except (KeyError, TypeError, AttributeError) as e:
        raise CheckpointError(f"malformed checkpoint: missing or bad field {e}") from None
    except ValueError as e:  # ConfigError, GenomeError, shape mismatches
        raise CheckpointError(f"checkpoint content invalid: {e}") from None


def load_checkpoint(path) -> Trainer:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads_checkpoint(fh.read())
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None


def _adam_doc(a: AdamState) -> dict:
    return {"lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps, "t": a.t,
            "m": _arrays_to_doc(a.m), "v": _arrays_to_doc(a.v)}


def dumps_controller(ctrl: Controller) -> str:
    """Controller weights (with shapes), Adam moments and baseline as JSON."""
    doc = {
        "format": CONTROLLER_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_qubits": ctrl.n_qubits,
        "n_layers": ctrl.n_layers,
        "dropout": ctrl.dropout,
        "entropy_beta": ctrl.entropy_beta,
        "params": _arrays_to_doc(ctrl.params),
        "adam": _adam_doc(ctrl.adam),
        "baseline": {"ema": ctrl.baseline.ema, "decay": ctrl.baseline.decay,
                     "initialized": ctrl.baseline.initialized},
    }
    return json.dumps(doc, sort_keys=True) + "\n"


def loads_controller(text: str) -> Controller:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"controller checkpoint is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("format") != CONTROLLER_FORMAT:
        raise CheckpointError("not an hqcc controller checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"controller checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}")
    try:
        ad = doc["adam"]
        adam = AdamState(lr=ad["lr"], beta1=ad["beta1"], beta2=ad["beta2"], eps=ad["eps"], t=ad["t"],
                         m=_arrays_from_doc(ad["m"]), v=_arrays_from_doc(ad["v"]))
        b = doc["baseline"]
        return Controller(int(doc["n_qubits"]), int(doc["n_layers"]), _arrays_from_doc(doc["params"]),
                          dropout=doc["dropout"], entropy_beta=doc["entropy_beta"], adam=adam,
                          baseline=RewardBaseline(b["ema"], b["decay"], b["initialized"]))
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"malformed controller checkpoint: missing or bad field {e}") from None


# --- evaluation -----------------------------------------------------------------

def evaluate(cfg: RunConfig, trainer: Trainer, test: LabeledImageSet) -> dict:
    if trainer.net.config.n_classes != cfg.model.n_classes:
        raise CheckpointError(
            f"checkpoint has {trainer.net.config.n_classes} classes, config expects {cfg.model.n_classes}"
        )
    out = {"epoch": trainer.epoch}
    out.update(evaluate_net(trainer.net, test))
    return out


def aggregate(records: list[dict]) -> dict:
    """Mean and sample std of every metric shared by ``records``."""
    keys = [k for k in records[0] if k != "epoch" and all(k in r for r in records)]
    out = {}
    for k in keys:
        m, s = mean_std([r[k] for r in records])
        out[k] = {"mean": m, "std": s}
    return out


# --- architecture search ----------------------------------------------------------

RewardFn = Callable[[CircuitGenome, int, int], float]


def _trained_reward(cfg: RunConfig, fit: LabeledImageSet, val: LabeledImageSet) -> RewardFn:
    def reward(genome: CircuitGenome, iteration: int, k: int) -> float:
        seed = int(np.random.SeedSequence([cfg.seed, 7, iteration, k]).generate_state(1)[0])
        history = train_model(cfg, genome, fit, val, epochs=cfg.search.inner_epochs, seed=seed)
        return history[-1]["accuracy"] / 100.0

    return reward


def new_controller(cfg: RunConfig) -> Controller:
    s, m = cfg.search, cfg.model
    return Controller.create(m.n_qubits, m.n_layers, _seed(cfg.seed, 3), lr=s.lr,
                             dropout=s.dropout, entropy_beta=s.entropy_beta)


def architecture_search(cfg: RunConfig, train: LabeledImageSet | None = None, *,
                        reward_fn: RewardFn | None = None, log_path=None, controller: Controller | None = None,
                        on_iteration: Callable[[int, Controller], None] | None = None):
    """Sample genomes, score them, update the controller; returns (best genome, report).

    The default reward is validation accuracy (as a fraction) after
    ``search.inner_epochs`` epochs on a split carved from ``train``. Tests may
    pass ``reward_fn(genome, iteration, index)`` instead. ``on_iteration(it, ctrl)``
    is called before each iteration's sampling and once more at the end.
    """
    s = cfg.search
    if reward_fn is None:
        if train is None or len(train) == 0:
            raise ValueError("architecture_search needs training data or a reward_fn")
        fit, val = split_validation(train, s.val_fraction, cfg.seed)
        reward_fn = _trained_reward(cfg, fit, val)
    ctrl = controller or new_controller(cfg)
    sample_rng = _seed(cfg.seed, 4)
    update_rng = _seed(cfg.seed, 5)
    run_id = cfg.resolved_run_id()
    best = None
    iterations = []
    for it in range(s.iterations):
        if on_iteration is not None:
            on_iteration(it, ctrl)
        samples = [ctrl.sample(sample_rng) for _ in range(s.genome_batch)]
        rewards = [float(reward_fn(g, it, k)) for k, (g, _) in enumerate(samples)]
        for (g, _), r in zip(samples, rewards):
            if best is None or r > best[1]:
                best = (g, r)
        loss = ctrl.update([t for _, t in samples], rewards, update_rng)
        entry = {
            "iteration": it,
            "rewards": rewards,
            "baseline": ctrl.baseline.ema,
            "loss": float(loss),
            "mean_entropy": float(np.mean([t.entropy for _, t in samples])),
            "best_reward": best[1],
            "best_genome": genome_to_dict(best[0]),
        }
        iterations.append(entry)
        if log_path is not None:
            append_log(log_path, {"run_id": run_id, "task": cfg.task_name, "kind": "search", **entry})
    if on_iteration is not None:
        on_iteration(s.iterations, ctrl)
    report = {"run_id": run_id, "iterations": iterations, "best_reward": best[1],
              "best_genome": genome_to_dict(best[0])}
    return best[0], report


def fixed_genome(cfg: RunConfig) -> CircuitGenome:
    return random_genome(cfg.model.n_qubits, cfg.model.n_layers, cfg.genome_seed)
