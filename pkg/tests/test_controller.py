import math

import numpy as np
import pytest

from hqcc.circuit import N_OPS, OP_INDEX
from hqcc.cnn import AdamState
from hqcc.controller import (
    HIDDEN, START_TOKEN, Controller, RewardBaseline, evaluate_trace, init_params, lstm_step,
    reinforce_loss_and_grads, reinforce_update, sample_genome,
)
from hqcc.harness import CheckpointError, dumps_controller, loads_controller

RY = OP_INDEX["Ry"]


def sig(x):
    return 1 / (1 + math.exp(-x))


def test_lstm_zero_weights():
    p = init_params(3, 0)
    p["lstm.w"][:] = 0
    p["lstm.b"][:] = 0
    h, c = lstm_step(p, np.ones(32), np.zeros(HIDDEN), np.zeros(HIDDEN))
    np.testing.assert_array_equal(h, 0)
    np.testing.assert_array_equal(c, 0)


def test_lstm_forget_gate_retention():
    p = init_params(3, 0)
    p["lstm.w"][:] = 0
    p["lstm.b"][:] = 0
    p["lstm.b"][HIDDEN:2 * HIDDEN] = 60.0
    c0 = np.random.default_rng(0).normal(size=HIDDEN)
    _, c = lstm_step(p, np.zeros(32), np.zeros(HIDDEN), c0)
    np.testing.assert_allclose(c, c0, atol=1e-12)


def test_lstm_matches_scalar_reimplementation():
    rng = np.random.default_rng(5)
    p = init_params(4, 5)
    x, h, c = rng.normal(size=32), rng.normal(size=HIDDEN) * 0.5, rng.normal(size=HIDDEN)
    h1, c1 = lstm_step(p, x, h, c)
    w, b = p["lstm.w"], p["lstm.b"]
    xh = list(x) + list(h)
    for j in range(HIDDEN):
        pre = [sum(w[g * HIDDEN + j, k] * xh[k] for k in range(len(xh))) + b[g * HIDDEN + j] for g in range(4)]
        cj = sig(pre[1]) * c[j] + sig(pre[0]) * math.tanh(pre[2])
        assert c1[j] == pytest.approx(cj, abs=1e-12)
        assert h1[j] == pytest.approx(sig(pre[3]) * math.tanh(cj), abs=1e-12)
    with pytest.raises(ValueError):
        lstm_step(p, np.zeros(31), h, c)


def test_deterministic_policy():
    p = init_params(3, 1)
    p["op.w"][:] = 0
    p["op.b"][:] = 0
    p["op.b"][OP_INDEX["H"]] = 1e4
    g, tr = sample_genome(p, 3, 2, np.random.default_rng(0))
    assert [d.name for d in g.decisions] == ["H"] * 6
    assert tr.logprob == pytest.approx(0.0, abs=1e-12)
    assert tr.entropy == pytest.approx(0.0, abs=1e-12)
    lp, ent = evaluate_trace(p, 3, tr.decisions, 1.0, 1.0, grads={k: np.zeros_like(v) for k, v in p.items()})
    assert np.isfinite(ent)


def test_sampling_determinism_and_trace_invariants():
    p = init_params(5, 2)
    a = sample_genome(p, 5, 3, np.random.default_rng(9))
    b = sample_genome(p, 5, 3, np.random.default_rng(9))
    assert a == b
    g, tr = a
    assert len(tr.decisions) == 15 and tr.logprob <= 0 and tr.entropy >= 0
    for d in g.decisions:
        d.validate(5)


def test_first_slot_marginal_near_uniform():
    ctrl = Controller.create(4, 1, 3)
    probs = ctrl.first_op_probs()
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(probs - 1 / N_OPS) < 0.03)
    rng = np.random.default_rng(3)
    n = 10_000
    counts = np.zeros(N_OPS)
    for _ in range(n):
        counts[ctrl.sample(rng)[0].decisions[0].op] += 1
    sigma = np.sqrt(n * probs * (1 - probs))
    assert np.all(np.abs(counts - n * probs) <= 3 * sigma), counts


def test_toffoli_masked_for_two_qubits():
    ctrl = Controller.create(2, 1, 0)
    assert ctrl.first_op_probs()[OP_INDEX["Toffoli"]] == 0.0
    rng = np.random.default_rng(0)
    assert all(d.name != "Toffoli" for _ in range(300) for d in ctrl.sample(rng)[0].decisions)


@pytest.mark.parametrize("seed", range(5))
def test_teacher_forcing_reproduces_sample(seed):
    p = init_params(4, seed)
    _, tr = sample_genome(p, 4, 3, np.random.default_rng(seed))
    lp, ent = evaluate_trace(p, 4, tr.decisions)
    assert lp == pytest.approx(tr.logprob, abs=1e-10)
    assert ent == pytest.approx(tr.entropy, abs=1e-10)


def test_entropy_bounds():
    p = init_params(4, 0)
    _, tr = sample_genome(p, 4, 1, np.random.default_rng(0))
    n_off = sum(0 if d.offset1 is None else (1 if d.offset2 is None else 2) for d in tr.decisions)
    assert tr.entropy <= 4 * math.log(12) + n_off * math.log(3) + 1e-12
    one = sample_genome(p, 4, 1, np.random.default_rng(1))[1].decisions[:1]
    lp, ent = evaluate_trace(p, 4, one)
    assert 0 <= ent <= math.log(12) + (math.log(3) * 2 if one[0].offset1 else 0)


@pytest.mark.parametrize("seed", [0, 1])
def test_reinforce_gradient_fd(seed):
    rng = np.random.default_rng(seed)
    p = init_params(4, seed)
    traces = [sample_genome(p, 4, 2, rng)[1] for _ in range(3)]
    adv = rng.normal(size=3)
    beta = 0.3
    _, grads = reinforce_loss_and_grads(p, 4, traces, adv, beta)
    keys = sorted(p)
    coords = []
    while len(coords) < 20:
        k = keys[rng.integers(len(keys))]
        i = int(rng.integers(p[k].size))
        if k == "emb" and i // p[k].shape[1] not in {START_TOKEN, *[d.op for t in traces for d in t.decisions]}:
            continue  # untouched embedding rows have zero gradient; keep the subset informative
        coords.append((k, i))
    h = 1e-6
    for k, i in coords:
        flat = p[k].reshape(-1)
        old = flat[i]
        flat[i] = old + h
        fp = reinforce_loss_and_grads(p, 4, traces, adv, beta)[0]
        flat[i] = old - h
        fm = reinforce_loss_and_grads(p, 4, traces, adv, beta)[0]
        flat[i] = old
        num = (fp - fm) / (2 * h)
        ana = grads[k].reshape(-1)[i]
        assert abs(num - ana) <= 1e-4 * abs(num) + 1e-9, (k, i, num, ana)


def test_zero_advantage_moves_only_by_entropy():
    p = init_params(3, 0)
    traces = [sample_genome(p, 3, 1, np.random.default_rng(s))[1] for s in range(4)]
    _, g0 = reinforce_loss_and_grads(p, 3, traces, np.zeros(4), 0.0)
    assert all(np.all(v == 0) for v in g0.values())
    _, g1 = reinforce_loss_and_grads(p, 3, traces, np.zeros(4), 0.01)
    assert any(np.any(v != 0) for v in g1.values())


def test_positive_advantage_raises_logprob():
    ctrl = Controller.create(3, 2, 4, lr=1e-3, entropy_beta=0.0, dropout=0.0)
    _, tr = ctrl.sample(np.random.default_rng(4))
    ctrl.baseline = RewardBaseline(ema=0.2, initialized=True)
    before = evaluate_trace(ctrl.params, 3, tr.decisions)[0]
    reinforce_update(ctrl, [tr], [1.0], np.random.default_rng(0))
    after = evaluate_trace(ctrl.params, 3, tr.decisions)[0]
    assert after > before


def test_update_errors_and_baseline():
    ctrl = Controller.create(3, 1, 0)
    with pytest.raises(ValueError):
        reinforce_update(ctrl, [], [])
    _, tr = ctrl.sample(np.random.default_rng(0))
    with pytest.raises(ValueError):
        reinforce_update(ctrl, [tr], [1.0, 2.0])
    b = RewardBaseline()
    seen = []
    rng = np.random.default_rng(1)
    for _ in range(30):
        r = rng.uniform(0.2, 0.9, size=4)
        seen.extend(r)
        b.update(r)
        assert min(seen) <= b.ema <= max(seen)
    b = RewardBaseline(ema=1.0, initialized=True)
    b.update([0.0])
    assert b.ema == pytest.approx(0.9)


def run_bandit(seed, max_updates=500):
    ctrl = Controller.create(2, 1, seed, lr=0.001)
    rng = np.random.default_rng([seed, 1])
    for t in range(1, max_updates + 1):
        samples = [ctrl.sample(rng) for _ in range(8)]
        rewards = [1.0 if g.decisions[0].op == RY else 0.0 for g, _ in samples]
        ctrl.update([tr for _, tr in samples], rewards, rng)
        if ctrl.first_op_probs()[RY] >= 0.9:
            return t
    return None


def test_bandit_converges():
    hits = [run_bandit(s) for s in range(5)]
    assert sum(h is not None for h in hits) >= 4, hits


def test_controller_checkpoint_roundtrip():
    ctrl = Controller.create(4, 2, 0)
    rng = np.random.default_rng(0)
    samples = [ctrl.sample(rng) for _ in range(3)]
    ctrl.update([t for _, t in samples], [0.1, 0.5, 0.9], rng)
    text = dumps_controller(ctrl)
    back = loads_controller(text)
    assert dumps_controller(back) == text
    for k in ctrl.params:
        np.testing.assert_array_equal(back.params[k], ctrl.params[k])
    assert isinstance(back.adam, AdamState) and back.adam.t == 1
    assert back.sample(np.random.default_rng(7)) == ctrl.sample(np.random.default_rng(7))
    with pytest.raises(CheckpointError):
        loads_controller(text.replace('"version": 1', '"version": 9'))
    with pytest.raises(CheckpointError):
        loads_controller("[]")
