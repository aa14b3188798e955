"""Conv -> Pool -> ... -> quantum filter -> FC -> ... -> logits, with exact backprop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cnn
from .circuit import CircuitGenome, compile_genome
from .vqcl import QuantumFilter, vqcl_forward, vqcl_forward_backward


@dataclass
class ModelConfig:
    input_shape: tuple[int, int] = (28, 28)
    conv_channels: tuple[int, ...] = (4, 1)
    kernel: int = 3
    window: tuple[int, int] = (3, 3)
    stride: int = 1
    n_layers: int = 5
    readout: int = 0
    fc_hidden: tuple[int, ...] = (32,)
    n_classes: int = 2

    def __post_init__(self):
        self.input_shape = tuple(self.input_shape)
        self.conv_channels = tuple(self.conv_channels)
        self.window = tuple(self.window)
        self.fc_hidden = tuple(self.fc_hidden)

    @property
    def n_qubits(self) -> int:
        return self.window[0] * self.window[1]

    def shapes(self):
        """Spatial size after each stage; raises if the topology does not fit."""
        q, p = self.input_shape
        out = [("input", (q, p))]
        for i, _ in enumerate(self.conv_channels):
            q, p = q - self.kernel + 1, p - self.kernel + 1
            if q < 2 or p < 2:
                raise ValueError(f"conv{i + 1} output {q}x{p} too small to pool")
            q, p = q // 2, p // 2
            out.append((f"pool{i + 1}", (q, p)))
        m, n = self.window
        if q < m or p < n:
            raise ValueError(f"quantum window {m}x{n} larger than feature map {q}x{p}")
        q, p = (q - m) // self.stride + 1, (p - n) // self.stride + 1
        out.append(("vqcl", (q, p)))
        return out


class HybridNet:
    """Parameters live in ``self.params`` (a flat dict) so Adam and checkpoints can treat them uniformly."""

    def __init__(self, config: ModelConfig, genome: CircuitGenome, rng=None, params=None):
        if genome.n_qubits != config.n_qubits:
            raise ValueError(f"genome has {genome.n_qubits} qubits, window needs {config.n_qubits}")
        if config.conv_channels and config.conv_channels[-1] != 1:
            raise ValueError("last conv layer must produce a single channel for the quantum filter")
        self.config = config
        self.genome = genome
        self.pqc = compile_genome(genome)
        stages = config.shapes()
        vq, vp = stages[-1][1]
        self.n_features = vq * vp
        if params is None:
            params = self._init_params(np.random.default_rng(rng))
        self.params = params

    def _init_params(self, rng):
        cfg = self.config
        k = cfg.kernel
        params = {}
        cin = 1
        for i, cout in enumerate(cfg.conv_channels):
            params[f"conv{i}.w"] = cnn.glorot_uniform(rng, (cout, cin, k, k), cin * k * k, cout * k * k)
            params[f"conv{i}.b"] = np.zeros(cout)
            cin = cout
        params["theta"] = rng.uniform(-np.pi, np.pi, size=self.pqc.n_params)
        fin = self.n_features
        for i, fout in enumerate(cfg.fc_hidden + (cfg.n_classes,)):
            params[f"fc{i}.w"] = cnn.glorot_uniform(rng, (fout, fin), fin, fout)
            params[f"fc{i}.b"] = np.zeros(fout)
            fin = fout
        return params

    @property
    def n_fc(self) -> int:
        return len(self.config.fc_hidden) + 1

    def quantum_filter(self) -> QuantumFilter:
        cfg = self.config
        return QuantumFilter(self.pqc, self.params["theta"], cfg.window, cfg.stride, cfg.readout)

    def _features(self, x, cache=None):
        a = np.asarray(x, dtype=np.float64)[:, None]
        for i in range(len(self.config.conv_channels)):
            z = cnn.conv2d_forward(a, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"])
            r = cnn.relu_forward(z)
            p, arg = cnn.maxpool2d_forward(r)
            if cache is not None:
                cache.append((a, z, r.shape, arg))
            a = p
        return a[:, 0]

    def forward(self, x):
        """Logits for a batch ``x`` of shape (B, Q, P), plus a cache for ``backward``."""
        convs = []
        fmap = self._features(x, convs)
        q = vqcl_forward(self.quantum_filter(), fmap)
        h = q.reshape(len(q), -1)
        fcs = []
        for i in range(self.n_fc):
            z = cnn.fc_forward(h, self.params[f"fc{i}.w"], self.params[f"fc{i}.b"])
            fcs.append((h, z))
            h = cnn.relu_forward(z) if i < self.n_fc - 1 else z
        return h, {"convs": convs, "fmap": fmap, "qshape": q.shape, "fcs": fcs}

    def backward(self, cache, dlogits) -> dict:
        grads = {}
        d = dlogits
        for i in reversed(range(self.n_fc)):
            h, z = cache["fcs"][i]
            if i < self.n_fc - 1:
                d = cnn.relu_backward(z, d)
            d, grads[f"fc{i}.w"], grads[f"fc{i}.b"] = cnn.fc_backward(h, self.params[f"fc{i}.w"], d)
        dq = d.reshape(cache["qshape"])
        _, grads["theta"], dfmap = vqcl_forward_backward(self.quantum_filter(), cache["fmap"], dq)
        d = dfmap[:, None]
        for i in reversed(range(len(self.config.conv_channels))):
            a, z, rshape, arg = cache["convs"][i]
            d = cnn.maxpool2d_backward(rshape, arg, d)
            d = cnn.relu_backward(z, d)
            d, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = cnn.conv2d_backward(a, self.params[f"conv{i}.w"], d)
        return grads

    def loss_and_grads(self, x, labels):
        logits, cache = self.forward(x)
        loss, dlogits = cnn.softmax_cross_entropy(logits, labels)
        return loss, self.backward(cache, dlogits)

    def predict_proba(self, x, batch_size: int = 256) -> np.ndarray:
        out = []
        for s in range(0, len(x), batch_size):
            logits, _ = self.forward(x[s:s + batch_size])
            out.append(cnn.softmax(logits))
        return np.concatenate(out) if out else np.zeros((0, self.config.n_classes))

    def n_quantum_params(self) -> int:
        return self.pqc.n_params
