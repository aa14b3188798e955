"""Sliding-window quantum filter over 2-D feature maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import qsim
from .qsim import CompiledPQC


def squash(x):
    """Map activations to encoding angles in (0, pi) via pi * sigmoid(x)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("squash got a non-finite activation")
    return np.pi * _sigmoid(x)


def squash_grad(x):
    s = _sigmoid(np.asarray(x, dtype=np.float64))
    return np.pi * s * (1.0 - s)


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class QuantumFilter:
    pqc: CompiledPQC
    thetas: np.ndarray
    window: tuple[int, int] = (3, 3)
    stride: int = 1
    readout: int = 0

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=np.float64).reshape(-1)
        m, n = self.window
        if m * n != self.pqc.n_qubits:
            raise ValueError(f"window {m}x{n} needs {m * n} qubits, circuit has {self.pqc.n_qubits}")
        if self.thetas.shape[0] != self.pqc.n_params:
            raise ValueError(f"filter has {self.thetas.shape[0]} thetas, circuit wants {self.pqc.n_params}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if not 0 <= self.readout < self.pqc.n_qubits:
            raise ValueError(f"readout {self.readout} out of range")

    def output_shape(self, q: int, p: int) -> tuple[int, int]:
        m, n = self.window
        if q < m or p < n:
            raise ValueError(f"window {m}x{n} larger than input {q}x{p}")
        s = self.stride
        return (q - m) // s + 1, (p - n) // s + 1


def _windows(filt: QuantumFilter, x: np.ndarray) -> np.ndarray:
    """(B, Q, P) -> (B, Q', P', m*n) row-major cells."""
    m, n = filt.window
    s = filt.stride
    qo, po = filt.output_shape(x.shape[1], x.shape[2])
    w = sliding_window_view(x, (m, n), axis=(1, 2))[:, ::s, ::s][:, :qo, :po]
    return w.reshape(x.shape[0], qo, po, m * n)


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ValueError(f"feature map must be 2-D or batched 3-D, got shape {x.shape}")
    return x, False


def vqcl_forward(filt: QuantumFilter, x) -> np.ndarray:
    """Readout expectation per window; accepts (Q, P) or (B, Q, P)."""
    x, single = _as_batch(x)
    win = _windows(filt, x)
    b, qo, po, k = win.shape
    angles = squash(win).reshape(-1, k)
    out = qsim.expectation_z_batch(filt.pqc, angles, filt.thetas, filt.readout)
    out = out.reshape(b, qo, po)
    return out[0] if single else out


def vqcl_forward_backward(filt: QuantumFilter, x, upstream):
    """Forward values plus ``(dthetas, dinput)`` for the upstream gradient."""
    x, single = _as_batch(x)
    up = np.asarray(upstream, dtype=np.float64)
    if single:
        up = up[None]
    win = _windows(filt, x)
    b, qo, po, k = win.shape
    if up.shape != (b, qo, po):
        raise ValueError(f"upstream shape {up.shape} does not match output {(b, qo, po)}")
    flat = win.reshape(-1, k)
    values, dthetas, dangles = qsim.adjoint_batch(
        filt.pqc, squash(flat), filt.thetas, filt.readout, weights=up.reshape(-1)
    )
    dcells = (dangles * squash_grad(flat)).reshape(b, qo, po, k)

    m, n = filt.window
    s = filt.stride
    dx = np.zeros_like(x)
    for i in range(m):
        for j in range(n):
            dx[:, i:i + s * qo:s, j:j + s * po:s] += dcells[..., i * n + j]
    values = values.reshape(b, qo, po)
    if single:
        return values[0], dthetas, dx[0]
    return values, dthetas, dx


def vqcl_backward(filt: QuantumFilter, x, upstream):
    _, dthetas, dx = vqcl_forward_backward(filt, x, upstream)
    return dthetas, dx
