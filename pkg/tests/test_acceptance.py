"""Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line (also collected in the terminal summary).
Run just this file with ``pytest tests/test_acceptance.py -v -s``.
"""

import os
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, random_bindings, random_pqc

from hqcc import config, harness
from hqcc.circuit import count_params, random_genome
from hqcc.cnn import softmax_cross_entropy
from hqcc.metrics import EvalRecord, accuracy, auc_binary, recall_f1
from hqcc.model import HybridNet, ModelConfig
from hqcc.qsim import (
    GateKind, dense_unitary_oracle, expectation_z, grad_adjoint, grad_parameter_shift, run_circuit,
)


def report(name, ok, detail):
    tag = "PASS" if ok else "FAIL"
    ACCEPTANCE.append((name, tag, detail))
    print(f"\n{tag} {name}: {detail}")
    assert ok, detail


def desk_config(mnist_subset, **kw):
    cfg = config.desk_preset(**kw)
    cfg.data.images, cfg.data.labels = mnist_subset
    return cfg


def test_c1_simulator_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_norm = worst_oracle = 0.0
    n_oracle = 0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        pqc = random_pqc(rng, n, int(rng.integers(1, 25)))
        x, th = random_bindings(rng, pqc)
        psi = run_circuit(pqc, x, th).amplitudes
        worst_norm = max(worst_norm, abs(np.linalg.norm(psi) - 1))
        if n <= 3:
            ref = dense_unitary_oracle(pqc.gates, n, x, th)[:, 0]
            worst_oracle = max(worst_oracle, np.abs(psi - ref).max())
            n_oracle += 1
    dt = time.perf_counter() - t0
    ok = worst_norm <= 1e-10 and worst_oracle <= 1e-12 and dt < 60
    report("1 simulator", ok, f"norm err {worst_norm:.1e} (<=1e-10), oracle err {worst_oracle:.1e} "
           f"(<=1e-12) over {n_oracle} small circuits, {dt:.1f}s (<60s)")


def test_c2_gradient_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    h = 1e-5
    worst_fd = worst_shift = 0.0
    kinds_seen = set()
    reload_seen = 0
    for i in range(200):
        n = int(rng.integers(2, 6))
        pqc = random_pqc(rng, n, int(rng.integers(4, 20)), n_inputs=max(1, n - 1))
        if i < 3:  # make sure each controlled rotation appears on its own at least once
            kind = [GateKind.CRX, GateKind.CRY, GateKind.CRZ][i]
            pqc = random_pqc(rng, n, 6, kinds=[kind, GateKind.H, GateKind.RY])
        x, th = random_bindings(rng, pqc)
        readout = int(rng.integers(n))
        kinds_seen |= {g.kind for g in pqc.gates}
        slots = [g.param.index for g in pqc.gates if type(g.param).__name__ == "InputSlot"]
        reload_seen += len(slots) != len(set(slots))
        dth, din = grad_adjoint(pqc, x, th, readout)
        f = lambda xx, tt: expectation_z(run_circuit(pqc, xx, tt), readout)  # noqa: E731
        for k in range(len(th)):
            e = np.zeros_like(th)
            e[k] = h
            worst_fd = max(worst_fd, abs((f(x, th + e) - f(x, th - e)) / (2 * h) - dth[k]))
        for k in range(len(x)):
            e = np.zeros_like(x)
            e[k] = h
            worst_fd = max(worst_fd, abs((f(x + e, th) - f(x - e, th)) / (2 * h) - din[k]))
        sth, sin = grad_parameter_shift(pqc, x, th, readout)
        worst_shift = max(worst_shift, np.abs(sth - dth).max(initial=0), np.abs(sin - din).max(initial=0))
    dt = time.perf_counter() - t0
    cr = {GateKind.CRX, GateKind.CRY, GateKind.CRZ}
    ok = worst_fd <= 1e-6 and worst_shift <= 1e-9 and dt < 120 and cr <= kinds_seen and reload_seen > 0
    report("2 gradients", ok, f"adjoint vs FD {worst_fd:.1e} (<=1e-6), vs shift rule {worst_shift:.1e} "
           f"(<=1e-9), {reload_seen} circuits with reloaded inputs, {dt:.1f}s (<120s)")


def test_c3_end_to_end_differentiability():
    cfg = ModelConfig(input_shape=(12, 12), conv_channels=(1,), window=(2, 2), n_layers=3,
                      fc_hidden=(6,), n_classes=2)
    net = HybridNet(cfg, random_genome(4, 3, 31), rng=31)
    rng = np.random.default_rng(31)
    x = rng.uniform(0, 1, size=(3, 12, 12))
    y = np.array([0, 1, 1])

    def loss():
        logits, _ = net.forward(x)
        return softmax_cross_entropy(logits, y)[0]

    _, grads = net.loss_and_grads(x, y)
    # 30 coordinates: all thetas (up to 10), then Conv1 and FC2, topped up from FC1
    n_theta = min(10, net.params["theta"].size)
    groups = {"theta": n_theta, "conv0.w": 7, "conv0.b": 1, "fc1.w": 8, "fc1.b": 2}
    groups["fc0.w"] = 30 - sum(groups.values())
    worst = 0.0
    count = 0
    h = 1e-6
    for key, n in groups.items():
        flat = net.params[key].reshape(-1)
        for i in rng.choice(flat.size, size=min(n, flat.size), replace=False):
            old = flat[i]
            flat[i] = old + h
            fp = loss()
            flat[i] = old - h
            fm = loss()
            flat[i] = old
            num = (fp - fm) / (2 * h)
            worst = max(worst, abs(num - grads[key].reshape(-1)[i]) / max(1.0, abs(num)))
            count += 1
    report("3 end-to-end gradient", worst <= 1e-5 and count == 30,
           f"{count} coords over conv1/theta/fc2, worst error {worst:.1e} (<=1e-5)")


def _brute_auc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    return ((pos[:, None] > neg).sum() + 0.5 * (pos[:, None] == neg).sum()) / (len(pos) * len(neg))


def _onehot(true, pred, k):
    sc = np.zeros((len(pred), k))
    sc[np.arange(len(pred)), pred] = 1
    return EvalRecord(sc, true)


def test_c4_metrics_oracle():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.integers(0, 8, n) / 7 if rng.random() < 0.5 else rng.random(n)
        worst = max(worst, abs(auc_binary(s, y) - _brute_auc(s, y)))
    true = [0] * 50 + [1] * 50
    pred = [0] * 50 + [0] * 10 + [1] * 40
    rec, f1 = recall_f1(_onehot(true, pred, 2), 2)
    hand = [
        abs(rec - 0.9) < 1e-12,
        abs(f1 - (10 / 11 + 8 / 9) / 2) < 1e-12,
        accuracy(_onehot(true, pred, 2)) == 90.0,
        accuracy(_onehot([0, 1, 2, 2], [0, 1, 2, 0], 3)) == 75.0,
        recall_f1(_onehot([0, 1, 0], [0, 1, 0], 3), 3) == pytest.approx((2 / 3, 2 / 3)),
        auc_binary([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75,
    ]
    report("4 metrics", worst <= 1e-12 and all(hand),
           f"AUC vs brute force {worst:.1e} on 1000 instances, {sum(hand)}/{len(hand)} hand cases")


def _bandit(seed, max_updates=500):
    from hqcc.circuit import OP_INDEX
    from hqcc.controller import Controller

    ry = OP_INDEX["Ry"]
    ctrl = Controller.create(2, 1, seed, lr=0.001)
    rng = np.random.default_rng([seed, 1])
    for t in range(1, max_updates + 1):
        samples = [ctrl.sample(rng) for _ in range(8)]
        ctrl.update([tr for _, tr in samples], [float(g.decisions[0].op == ry) for g, _ in samples], rng)
        if ctrl.first_op_probs()[ry] >= 0.9:
            return t
    return None


def test_c5_controller_sanity():
    hits = [_bandit(s) for s in range(5)]
    n_ok = sum(h is not None for h in hits)

    cfg = config.desk_preset()
    cfg.search.iterations = 50
    total = cfg.model.n_qubits * cfg.model.n_layers
    probe = []

    def measure(it, ctrl):
        # policy's mean parameterized-op fraction, from a large independent sample
        if it % 10 == 0:
            r = np.random.default_rng([cfg.seed, 99, it])
            probe.append(float(np.mean([count_params(ctrl.sample(r)[0]) / total for _ in range(400)])))

    harness.architecture_search(cfg, reward_fn=lambda g, it, k: count_params(g) / total, on_iteration=measure)
    increasing = bool(np.all(np.diff(probe) > 0))
    report("5 controller", n_ok >= 4 and increasing,
           f"bandit converged in {n_ok}/5 seeds (updates {hits}); parameterized fraction at iterations "
           f"0,10,..,50 = {[round(p, 3) for p in probe]} strictly increasing: {increasing}")


def test_c6_desk_scale_classification(mnist_subset):
    cfg = desk_config(mnist_subset)
    t0 = time.process_time()
    train, test = harness.load_task(cfg)
    history = harness.train_model(cfg, harness.fixed_genome(cfg), train, test, epochs=10)
    dt = time.process_time() - t0
    accs = [e["accuracy"] for e in history]
    ok = max(accs) >= 95.0 and dt < 600
    report("6 desk-scale 0-vs-1", ok, f"test accuracy by epoch {accs}, best {max(accs):.1f}% (>=95%), "
           f"{dt:.0f}s CPU (<600s)")


def test_c8_reproducibility(mnist_subset, tmp_path):
    cfg = desk_config(mnist_subset)
    cfg.search.iterations = 1
    cfg.search.genome_batch = 2
    cfg.search.inner_epochs = 1
    logs = []
    for run in ("a", "b"):
        log = tmp_path / f"{run}.jsonl"
        train, test = harness.load_task(cfg)
        harness.train_model(cfg, harness.fixed_genome(cfg), train, test, epochs=2, log_path=log)
        harness.architecture_search(cfg, train, log_path=log)
        logs.append(log.read_bytes())
    n_lines = len(logs[0].splitlines())
    report("8 reproducibility", logs[0] == logs[1] and n_lines == 3,
           f"two runs, {n_lines} log lines each, byte-identical: {logs[0] == logs[1]}")


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("HQCC_FULL_MNIST"), reason="optional: set HQCC_FULL_MNIST to a full MNIST dir")
def test_c7_full_scale():
    from hqcc.experiments import REFERENCE_ACCURACY, REFERENCE_TOLERANCE, full_scale

    s = full_scale(os.environ["HQCC_FULL_MNIST"])
    report("7 full-scale 0-vs-5", s["within_tolerance"] and s["search_not_worse"],
           f"searched {s['search']['mean']:.2f}±{s['search']['std']:.2f} vs reference {REFERENCE_ACCURACY}"
           f"±{REFERENCE_TOLERANCE}; random baseline {s['random']['mean']:.2f}±{s['random']['std']:.2f}")
