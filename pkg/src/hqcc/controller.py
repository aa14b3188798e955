"""LSTM policy that emits circuit genomes, trained with REINFORCE.

The policy is autoregressive over the L*N decision slots. Each step embeds the
previous op token (a learned start token first), advances one LSTM cell, and
samples an op; two- and three-qubit ops then sample partner offsets from
separate heads. Teacher-forced re-evaluation of a recorded trace gives the
log-probability and entropy together with exact gradients (BPTT).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import N_OPS, OFFSETS_NEEDED, TOFFOLI, CircuitGenome, Decision
from .cnn import AdamState, adam_step

EMBED_DIM = 32
HIDDEN = 64
START_TOKEN = N_OPS
ENTROPY_BETA = 0.01
DROPOUT = 0.2
BASELINE_DECAY = 0.9


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_params(n_qubits: int, rng, embed_dim: int = EMBED_DIM, hidden: int = HIDDEN) -> dict:
    if n_qubits < 2:
        raise ValueError("controller needs n_qubits >= 2")
    rng = np.random.default_rng(rng)
    k = 1.0 / np.sqrt(hidden)
    u = lambda *shape: rng.uniform(-k, k, size=shape)  # noqa: E731
    return {
        "emb": rng.normal(0.0, 1.0, size=(N_OPS + 1, embed_dim)),
        "lstm.w": u(4 * hidden, embed_dim + hidden),
        "lstm.b": u(4 * hidden),
        "op.w": u(N_OPS, hidden),
        "op.b": u(N_OPS),
        "off1.w": u(n_qubits - 1, hidden),
        "off1.b": u(n_qubits - 1),
        "off2.w": u(n_qubits - 1, hidden),
        "off2.b": u(n_qubits - 1),
    }


def lstm_step(params: dict, x, h, c):
    """One LSTM cell step with gates ordered (input, forget, candidate, output)."""
    w, b = params["lstm.w"], params["lstm.b"]
    hidden = w.shape[0] // 4
    if x.shape[-1] + h.shape[-1] != w.shape[1] or h.shape != c.shape or h.shape[-1] != hidden:
        raise ValueError(f"lstm dims: x {x.shape}, h {h.shape}, c {c.shape}, w {w.shape}")
    z = w @ np.concatenate([x, h]) + b
    i = _sigmoid(z[:hidden])
    f = _sigmoid(z[hidden:2 * hidden])
    g = np.tanh(z[2 * hidden:3 * hidden])
    o = _sigmoid(z[3 * hidden:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def _masked_softmax(logits, mask):
    z = np.where(mask, logits, -np.inf)
    z = z - z[mask].max()
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum()


def _entropy(p, mask):
    q = p[mask & (p > 0)]  # 0 log 0 = 0
    return float(-(q * np.log(q)).sum())


def _head_masks(n_qubits):
    op_mask = np.ones(N_OPS, dtype=bool)
    if n_qubits < 3:
        op_mask[TOFFOLI] = False
    return op_mask, np.ones(n_qubits - 1, dtype=bool)


@dataclass
class SampleTrace:
    decisions: tuple[Decision, ...]
    logprob: float
    entropy: float


@dataclass
class RewardBaseline:
    ema: float = 0.0
    decay: float = BASELINE_DECAY
    initialized: bool = False

    def update(self, rewards):
        r = float(np.mean(rewards))
        if not self.initialized:
            self.ema, self.initialized = r, True
        else:
            self.ema = self.decay * self.ema + (1.0 - self.decay) * r


@dataclass
class Controller:
    n_qubits: int
    n_layers: int
    params: dict
    dropout: float = DROPOUT
    entropy_beta: float = ENTROPY_BETA
    adam: AdamState = field(default_factory=lambda: AdamState(lr=0.001))
    baseline: RewardBaseline = field(default_factory=RewardBaseline)

    @classmethod
    def create(cls, n_qubits: int, n_layers: int, seed, lr: float = 0.001, **kw) -> "Controller":
        return cls(n_qubits, n_layers, init_params(n_qubits, seed), adam=AdamState(lr=lr), **kw)

    @property
    def hidden(self) -> int:
        return self.params["lstm.w"].shape[0] // 4

    def sample(self, rng) -> tuple[CircuitGenome, SampleTrace]:
        return sample_genome(self.params, self.n_qubits, self.n_layers, rng)

    def first_op_probs(self) -> np.ndarray:
        """Op distribution at slot 0 (its input is always the start token)."""
        h = np.zeros(self.hidden)
        h, _ = lstm_step(self.params, self.params["emb"][START_TOKEN], h, np.zeros_like(h))
        logits = self.params["op.w"] @ h + self.params["op.b"]
        return _masked_softmax(logits, _head_masks(self.n_qubits)[0])

    def update(self, traces, rewards, rng=None) -> float:
        return reinforce_update(self, traces, rewards, rng)


def sample_genome(params: dict, n_qubits: int, n_layers: int, rng) -> tuple[CircuitGenome, SampleTrace]:
    if n_qubits < 2:
        raise ValueError("sample_genome needs n_qubits >= 2")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    op_mask, off_mask = _head_masks(n_qubits)
    hidden = params["lstm.w"].shape[0] // 4
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    token = START_TOKEN
    logprob = 0.0
    entropy = 0.0
    decisions = []
    for _ in range(n_qubits * n_layers):
        h, c = lstm_step(params, params["emb"][token], h, c)
        p = _masked_softmax(params["op.w"] @ h + params["op.b"], op_mask)
        op = int(rng.choice(N_OPS, p=p))
        logprob += np.log(p[op])
        entropy += _entropy(p, op_mask)
        offsets = []
        if OFFSETS_NEEDED[op] >= 1:
            p1 = _masked_softmax(params["off1.w"] @ h + params["off1.b"], off_mask)
            k1 = int(rng.choice(n_qubits - 1, p=p1))
            logprob += np.log(p1[k1])
            entropy += _entropy(p1, off_mask)
            offsets.append(k1 + 1)
        if OFFSETS_NEEDED[op] == 2:
            m2 = off_mask.copy()
            m2[k1] = False
            p2 = _masked_softmax(params["off2.w"] @ h + params["off2.b"], m2)
            k2 = int(rng.choice(n_qubits - 1, p=p2))
            logprob += np.log(p2[k2])
            entropy += _entropy(p2, m2)
            offsets.append(k2 + 1)
        decisions.append(Decision(op, *offsets))
        token = op
    decisions = tuple(decisions)
    genome = CircuitGenome(n_qubits, n_layers, decisions)
    return genome, SampleTrace(decisions, float(logprob), float(entropy))


def _head_choices(d: Decision, off_mask):
    """(head name, chosen index, mask) for every head this decision sampled."""
    heads = []
    if d.offset1 is not None:
        heads.append(("off1", d.offset1 - 1, off_mask))
    if d.offset2 is not None:
        m2 = off_mask.copy()
        m2[d.offset1 - 1] = False
        heads.append(("off2", d.offset2 - 1, m2))
    return heads


def evaluate_trace(params: dict, n_qubits: int, decisions, dlogprob: float = 0.0,
                   dentropy: float = 0.0, dropout: float = 0.0, rng=None, grads: dict | None = None):
    """Teacher-forced ``(logprob, entropy)`` of ``decisions``.

    If ``grads`` is given, ``dlogprob * d(logprob) + dentropy * d(entropy)`` is
    accumulated into it. ``dropout > 0`` applies inverted dropout to the LSTM
    output before the heads, with masks drawn from ``rng``.
    """
    op_mask, off_mask = _head_masks(n_qubits)
    w = params["lstm.w"]
    hidden = w.shape[0] // 4
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    token = START_TOKEN
    logprob = 0.0
    entropy = 0.0
    steps = []
    for d in decisions:
        x = params["emb"][token]
        xh = np.concatenate([x, h])
        z = w @ xh + params["lstm.b"]
        i = _sigmoid(z[:hidden])
        f = _sigmoid(z[hidden:2 * hidden])
        g = np.tanh(z[2 * hidden:3 * hidden])
        o = _sigmoid(z[3 * hidden:])
        c_prev = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        if dropout > 0:
            keep = (rng.random(hidden) >= dropout) / (1.0 - dropout)
        else:
            keep = None
        hd = h * keep if keep is not None else h
        heads = [("op", d.op, op_mask)] + _head_choices(d, off_mask)
        head_cache = []
        for name, k, mask in heads:
            p = _masked_softmax(params[f"{name}.w"] @ hd + params[f"{name}.b"], mask)
            ent = _entropy(p, mask)
            logprob += np.log(p[k])
            entropy += ent
            head_cache.append((name, k, mask, p, ent))
        steps.append((token, xh, c_prev, i, f, g, o, tc, keep, hd, head_cache))
        token = d.op

    if grads is not None:
        _backprop(params, steps, dlogprob, dentropy, grads)
    return float(logprob), float(entropy)


def _backprop(params, steps, a, b, grads):
    w = params["lstm.w"]
    hidden = w.shape[0] // 4
    embed = params["emb"].shape[1]
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)
    for token, xh, c_prev, i, f, g, o, tc, keep, hd, head_cache in reversed(steps):
        dhd = np.zeros(hidden)
        for name, k, mask, p, ent in head_cache:
            dz = -a * p
            dz[k] += a
            live = mask & (p > 0)
            lp = np.zeros_like(p)
            lp[live] = np.log(p[live])
            dz += b * np.where(live, -p * (lp + ent), 0.0)
            grads[f"{name}.w"] += np.outer(dz, hd)
            grads[f"{name}.b"] += dz
            dhd += params[f"{name}.w"].T @ dz
        dh = (dhd * keep if keep is not None else dhd) + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc ** 2) + dc_next
        dz = np.concatenate([
            dc * g * i * (1 - i),
            dc * c_prev * f * (1 - f),
            dc * i * (1 - g ** 2),
            do * o * (1 - o),
        ])
        grads["lstm.w"] += np.outer(dz, xh)
        grads["lstm.b"] += dz
        dxh = w.T @ dz
        grads["emb"][token] += dxh[:embed]
        dh_next = dxh[embed:]
        dc_next = dc * f


def reinforce_loss_and_grads(params, n_qubits, traces, advantages, beta, dropout=0.0, rng=None):
    """Loss ``-mean(A * logprob) - beta * mean(entropy)`` and its gradient."""
    k = len(traces)
    grads = {name: np.zeros_like(v) for name, v in params.items()}
    loss = 0.0
    for tr, adv in zip(traces, advantages):
        lp, ent = evaluate_trace(params, n_qubits, tr.decisions, -adv / k, -beta / k,
                                 dropout=dropout, rng=rng, grads=grads)
        loss += (-adv * lp - beta * ent) / k
    return loss, grads


def reinforce_update(ctrl: Controller, traces, rewards, rng=None) -> float:
    """One Adam step on the REINFORCE objective; updates the EMA baseline afterwards."""
    if len(traces) == 0:
        raise ValueError("reinforce_update needs at least one trace")
    if len(traces) != len(rewards):
        raise ValueError(f"{len(traces)} traces but {len(rewards)} rewards")
    rewards = np.asarray(rewards, dtype=np.float64)
    if not ctrl.baseline.initialized:
        # seed with the first batch mean so the baseline starts inside the reward range
        ctrl.baseline.ema = float(rewards.mean())
        ctrl.baseline.initialized = True
    advantages = rewards - ctrl.baseline.ema
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    loss, grads = reinforce_loss_and_grads(ctrl.params, ctrl.n_qubits, traces, advantages,
                                           ctrl.entropy_beta, ctrl.dropout, rng)
    adam_step(ctrl.params, grads, ctrl.adam)
    ctrl.baseline.update(rewards)
    return loss
