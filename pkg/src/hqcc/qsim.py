"""Exact statevector simulation for small parameterized circuits.

Qubit ``q`` is bit ``q`` of the basis index (qubit 0 is the least significant
bit). States are complex128 throughout.

The public single-state API (``init_state``, ``apply_gate``, ``run_circuit``,
``grad_adjoint``, ...) is a thin layer over batched kernels that evolve a
``(batch, 2**n)`` array of states sharing one gate list but carrying per-row
input angles. The quantum convolution layer uses the batched kernels directly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

MAX_QUBITS = 12
ORACLE_MAX_QUBITS = 3


class SimulationError(ValueError):
    """Invalid circuit, gate, state or binding."""


class GateKind(str, enum.Enum):
    H = "H"
    X = "X"
    CNOT = "CNOT"
    SWAP = "SWAP"
    TOFFOLI = "Toffoli"
    RX = "Rx"
    RY = "Ry"
    RZ = "Rz"
    CRX = "CRx"
    CRY = "CRy"
    CRZ = "CRz"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def parameterized(self) -> bool:
        return self in _ROTATION_AXIS

    @property
    def controlled_rotation(self) -> bool:
        return self in (GateKind.CRX, GateKind.CRY, GateKind.CRZ)


_ARITY = {
    GateKind.H: 1, GateKind.X: 1, GateKind.RX: 1, GateKind.RY: 1, GateKind.RZ: 1,
    GateKind.CNOT: 2, GateKind.SWAP: 2, GateKind.CRX: 2, GateKind.CRY: 2, GateKind.CRZ: 2,
    GateKind.TOFFOLI: 3,
}
_ROTATION_AXIS = {
    GateKind.RX: "x", GateKind.RY: "y", GateKind.RZ: "z",
    GateKind.CRX: "x", GateKind.CRY: "y", GateKind.CRZ: "z",
}


@dataclass(frozen=True)
class Constant:
    angle: float


@dataclass(frozen=True)
class ThetaSlot:
    index: int


@dataclass(frozen=True)
class InputSlot:
    index: int


ParamSource = Union[Constant, ThetaSlot, InputSlot]


@dataclass(frozen=True)
class GateInstance:
    """One gate: ``qubits`` lists control(s) first and the target last."""

    kind: GateKind
    qubits: tuple[int, ...]
    param: ParamSource | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != self.kind.arity:
            raise SimulationError(
                f"{self.kind.value} acts on {self.kind.arity} qubit(s), got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise SimulationError(f"{self.kind.value} qubits must be distinct: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise SimulationError(f"negative qubit index in {self.qubits}")
        if self.kind.parameterized and self.param is None:
            raise SimulationError(f"{self.kind.value} needs a parameter source")
        if not self.kind.parameterized and self.param is not None:
            raise SimulationError(f"{self.kind.value} takes no parameter")

    def __str__(self) -> str:
        qs = ",".join(str(q) for q in self.qubits)
        if self.param is None:
            return f"{self.kind.value}({qs})"
        p = self.param
        if isinstance(p, ThetaSlot):
            arg = f"theta[{p.index}]"
        elif isinstance(p, InputSlot):
            arg = f"input[{p.index}]"
        else:
            arg = repr(p.angle)
        return f"{self.kind.value}({qs}; {arg})"


@dataclass(frozen=True)
class CompiledPQC:
    """Flat gate sequence with trainable-parameter and input-angle slots."""

    n_qubits: int
    n_inputs: int
    n_params: int
    gates: tuple[GateInstance, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        _check_n_qubits(self.n_qubits)
        for g in self.gates:
            _check_qubits(g, self.n_qubits)
            if isinstance(g.param, ThetaSlot) and not 0 <= g.param.index < self.n_params:
                raise SimulationError(f"theta slot {g.param.index} out of range in {g}")
            if isinstance(g.param, InputSlot) and not 0 <= g.param.index < self.n_inputs:
                raise SimulationError(f"input slot {g.param.index} out of range in {g}")


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2 ** self.n_qubits,):
            raise SimulationError(
                f"expected {2 ** self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _check_n_qubits(n):
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise SimulationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n!r}")


def _check_qubits(gate: GateInstance, n: int):
    for q in gate.qubits:
        if q >= n:
            raise SimulationError(f"qubit {q} out of range for {n} qubits in {gate}")


# --- gate matrices ---------------------------------------------------------
# A 2x2 block is a tuple (u00, u01, u10, u11); entries may be scalars or
# per-row arrays of shape (batch,).

def _rotation_block(axis: str, angle, derivative: bool = False):
    half = np.asarray(angle, dtype=np.float64) / 2.0
    c, s = np.cos(half), np.sin(half)
    if axis == "x":
        if derivative:
            return (-s / 2, -0.5j * c, -0.5j * c, -s / 2)
        return (c + 0j, -1j * s, -1j * s, c + 0j)
    if axis == "y":
        if derivative:
            return (-s / 2 + 0j, -c / 2 + 0j, c / 2 + 0j, -s / 2 + 0j)
        return (c + 0j, -s + 0j, s + 0j, c + 0j)
    em = np.exp(-1j * half)
    ep = np.exp(1j * half)
    zero = np.zeros_like(em)
    if derivative:
        return (-0.5j * em, zero, zero, 0.5j * ep)
    return (em, zero, zero, ep)


_H = 1.0 / math.sqrt(2.0)
_H_BLOCK = (_H + 0j, _H + 0j, _H + 0j, -_H + 0j)
_X_BLOCK = (0j, 1 + 0j, 1 + 0j, 0j)


def gate_matrix(kind: GateKind, angle: float | None = None) -> np.ndarray:
    """Matrix of ``kind`` in its own qubit order (target = least significant)."""
    kind = GateKind(kind)
    if kind.parameterized and angle is None:
        raise SimulationError(f"{kind.value} needs an angle")
    if kind is GateKind.H:
        return np.array(_H_BLOCK).reshape(2, 2)
    if kind is GateKind.X:
        return np.array(_X_BLOCK).reshape(2, 2)
    if kind in (GateKind.RX, GateKind.RY, GateKind.RZ):
        return np.array(_rotation_block(_ROTATION_AXIS[kind], angle), dtype=complex).reshape(2, 2)
    raise SimulationError(f"gate_matrix only covers single-qubit kinds, got {kind.value}")


# --- batched kernels -------------------------------------------------------

def _axis(n: int, q: int) -> int:
    # tensor view is (batch, q_{n-1}, ..., q_0)
    return n - q


def _bcast(u, ndim):
    u = np.asarray(u)
    if u.ndim == 0:
        return u
    return u.reshape(u.shape + (1,) * (ndim - 1))


def _apply_block(t: np.ndarray, n: int, target: int, block, controls=()):
    """In-place 2x2 ``block`` on ``target`` restricted to controls == 1."""
    idx = [slice(None)] * t.ndim
    for c in controls:
        idx[_axis(n, c)] = 1
    ax = _axis(n, target)
    i0 = list(idx)
    i1 = list(idx)
    i0[ax] = 0
    i1[ax] = 1
    a0 = t[tuple(i0)]
    a1 = t[tuple(i1)]
    u00, u01, u10, u11 = (_bcast(u, a0.ndim) for u in block)
    new0 = u00 * a0 + u01 * a1
    a1[...] = u10 * a0 + u11 * a1
    a0[...] = new0


def _zero_where_control_off(t: np.ndarray, n: int, control: int):
    idx = [slice(None)] * t.ndim
    idx[_axis(n, control)] = 0
    t[tuple(idx)] = 0


def _apply_kind(t, n, kind, qubits, angle, *, inverse=False, derivative=False):
    """Apply one gate (or its inverse, or its angle-derivative) in place."""
    if kind is GateKind.H:
        _apply_block(t, n, qubits[0], _H_BLOCK)
    elif kind is GateKind.X:
        _apply_block(t, n, qubits[0], _X_BLOCK)
    elif kind is GateKind.CNOT:
        _apply_block(t, n, qubits[1], _X_BLOCK, qubits[:1])
    elif kind is GateKind.TOFFOLI:
        _apply_block(t, n, qubits[2], _X_BLOCK, qubits[:2])
    elif kind is GateKind.SWAP:
        t[...] = np.swapaxes(t, _axis(n, qubits[0]), _axis(n, qubits[1])).copy()
    else:
        a = -np.asarray(angle) if inverse else angle
        block = _rotation_block(_ROTATION_AXIS[kind], a, derivative)
        if kind.controlled_rotation:
            if derivative:
                _zero_where_control_off(t, n, qubits[0])
            _apply_block(t, n, qubits[1], block, qubits[:1])
        else:
            _apply_block(t, n, qubits[0], block)


def _as_batch(pqc: CompiledPQC, inputs, thetas):
    inputs = np.asarray(inputs, dtype=np.float64)
    thetas = np.asarray(thetas, dtype=np.float64).reshape(-1)
    if inputs.ndim == 1:
        inputs = inputs[None, :]
    if inputs.ndim != 2 or inputs.shape[1] != pqc.n_inputs:
        raise SimulationError(f"expected {pqc.n_inputs} inputs per row, got shape {inputs.shape}")
    if thetas.shape[0] != pqc.n_params:
        raise SimulationError(f"expected {pqc.n_params} thetas, got {thetas.shape[0]}")
    return inputs, thetas


def _bound_angle(gate: GateInstance, inputs: np.ndarray, thetas: np.ndarray):
    p = gate.param
    if p is None:
        return None
    if isinstance(p, Constant):
        return float(p.angle)
    if isinstance(p, ThetaSlot):
        return float(thetas[p.index])
    return inputs[:, p.index]


def _evolve(pqc: CompiledPQC, angles: Sequence, batch: int) -> np.ndarray:
    n = pqc.n_qubits
    psi = np.zeros((batch, 2 ** n), dtype=np.complex128)
    psi[:, 0] = 1.0
    t = psi.reshape((batch,) + (2,) * n)
    for gate, a in zip(pqc.gates, angles):
        _apply_kind(t, n, gate.kind, gate.qubits, a)
    return psi


def _z_signs(n: int, readout: int) -> np.ndarray:
    if not 0 <= readout < n:
        raise SimulationError(f"readout qubit {readout} out of range for {n} qubits")
    k = np.arange(2 ** n)
    return 1.0 - 2.0 * ((k >> readout) & 1)


def run_batch(pqc: CompiledPQC, inputs, thetas) -> np.ndarray:
    """Evolve |0...0> for every row of ``inputs``; returns (batch, 2**n) amplitudes."""
    inputs, thetas = _as_batch(pqc, inputs, thetas)
    angles = [_bound_angle(g, inputs, thetas) for g in pqc.gates]
    return _evolve(pqc, angles, inputs.shape[0])


def expectation_z_batch(pqc: CompiledPQC, inputs, thetas, readout: int = 0) -> np.ndarray:
    psi = run_batch(pqc, inputs, thetas)
    signs = _z_signs(pqc.n_qubits, readout)
    return (np.abs(psi) ** 2) @ signs


def adjoint_batch(pqc: CompiledPQC, inputs, thetas, readout: int = 0, weights=None):
    """Expectations and weighted adjoint gradients for a batch of input rows.

    Returns ``(values, dthetas, dinputs)`` where ``dthetas`` is the gradient of
    ``sum_b weights[b] * E_b`` and ``dinputs[b]`` is ``weights[b] * dE_b/dinputs``.
    """
    inputs, thetas = _as_batch(pqc, inputs, thetas)
    batch = inputs.shape[0]
    n = pqc.n_qubits
    weights = np.ones(batch) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.shape[0] != batch:
        raise SimulationError(f"expected {batch} weights, got {weights.shape[0]}")
    signs = _z_signs(n, readout)
    angles = [_bound_angle(g, inputs, thetas) for g in pqc.gates]

    psi = _evolve(pqc, angles, batch)
    values = (np.abs(psi) ** 2) @ signs
    lam = psi * signs * weights[:, None]
    shape = (batch,) + (2,) * n
    tp = psi.reshape(shape)
    tl = lam.reshape(shape)

    dthetas = np.zeros(pqc.n_params)
    dinputs = np.zeros((batch, pqc.n_inputs))
    for gate, a in zip(reversed(pqc.gates), reversed(angles)):
        _apply_kind(tp, n, gate.kind, gate.qubits, a, inverse=True)
        p = gate.param
        if isinstance(p, (ThetaSlot, InputSlot)):
            mu = psi.copy()
            _apply_kind(mu.reshape(shape), n, gate.kind, gate.qubits, a, derivative=True)
            g = 2.0 * np.real(np.einsum("bk,bk->b", lam.conj(), mu))
            if isinstance(p, ThetaSlot):
                dthetas[p.index] += g.sum()
            else:
                dinputs[:, p.index] += g
        _apply_kind(tl, n, gate.kind, gate.qubits, a, inverse=True)
    return values, dthetas, dinputs


# --- single-state API ------------------------------------------------------

def init_state(n_qubits: int) -> StateVector:
    _check_n_qubits(n_qubits)
    amps = np.zeros(2 ** n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_gate(state: StateVector, gate: GateInstance, theta: float | None = None) -> StateVector:
    """Return a new state with ``gate`` applied; ``theta`` iff the gate is parameterized."""
    _check_qubits(gate, state.n_qubits)
    if gate.kind.parameterized and theta is None:
        raise SimulationError(f"{gate.kind.value} needs an angle")
    if not gate.kind.parameterized and theta is not None:
        raise SimulationError(f"{gate.kind.value} takes no angle")
    n = state.n_qubits
    psi = state.amplitudes.copy()[None, :]
    _apply_kind(psi.reshape((1,) + (2,) * n), n, gate.kind, gate.qubits, theta)
    return StateVector(n, psi[0])


def expectation_z(state: StateVector, readout: int = 0) -> float:
    signs = _z_signs(state.n_qubits, readout)
    return float(np.abs(state.amplitudes) ** 2 @ signs)


def run_circuit(pqc: CompiledPQC, inputs, thetas) -> StateVector:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 1:
        raise SimulationError("run_circuit takes a single input vector; use run_batch")
    return StateVector(pqc.n_qubits, run_batch(pqc, inputs, thetas)[0])


def grad_adjoint(pqc: CompiledPQC, inputs, thetas, readout: int = 0):
    """Exact ``(dE/dthetas, dE/dinputs)`` of the readout Z expectation."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 1:
        raise SimulationError("grad_adjoint takes a single input vector; use adjoint_batch")
    _, dth, din = adjoint_batch(pqc, inputs, thetas, readout)
    return dth, din[0]


# Four-term rule coefficients for generators with spectrum {0, +-1/2}.
_C1 = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C2 = (math.sqrt(2) - 1) / (4 * math.sqrt(2))


def grad_parameter_shift(pqc: CompiledPQC, inputs, thetas, readout: int = 0):
    """Gradients by shifted re-evaluation, one gate occurrence at a time.

    Single-qubit rotations use the two-term rule; controlled rotations use the
    four-term rule with shifts of pi/2 and 3pi/2.
    """
    inputs, thetas = _as_batch(pqc, inputs, thetas)
    if inputs.shape[0] != 1:
        raise SimulationError("grad_parameter_shift takes a single input vector")
    signs = _z_signs(pqc.n_qubits, readout)
    base = [_bound_angle(g, inputs, thetas) for g in pqc.gates]

    def shifted(k, delta):
        angles = list(base)
        angles[k] = angles[k] + delta
        psi = _evolve(pqc, angles, 1)
        return float((np.abs(psi[0]) ** 2) @ signs)

    dth = np.zeros(pqc.n_params)
    din = np.zeros(pqc.n_inputs)
    for k, gate in enumerate(pqc.gates):
        p = gate.param
        if not isinstance(p, (ThetaSlot, InputSlot)):
            continue
        h = math.pi / 2
        if gate.kind.controlled_rotation:
            g = _C1 * (shifted(k, h) - shifted(k, -h)) - _C2 * (shifted(k, 3 * h) - shifted(k, -3 * h))
        else:
            g = 0.5 * (shifted(k, h) - shifted(k, -h))
        if isinstance(p, ThetaSlot):
            dth[p.index] += g
        else:
            din[p.index] += g
    return dth, din


# --- dense oracle ------------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)
_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _embed(n: int, factors: dict[int, np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, factors.get(q, _I2))
    return out


def _dense_gate(n: int, gate: GateInstance, angle) -> np.ndarray:
    k, qs = gate.kind, gate.qubits
    if k in (GateKind.H, GateKind.X, GateKind.RX, GateKind.RY, GateKind.RZ):
        return _embed(n, {qs[0]: gate_matrix(k, angle)})
    if k is GateKind.SWAP:
        return sum(_embed(n, {qs[0]: P, qs[1]: P}) for P in [_I2, *_PAULI.values()]) / 2
    if k is GateKind.CNOT:
        return _embed(n, {qs[0]: _P0}) + _embed(n, {qs[0]: _P1, qs[1]: _PAULI["x"]})
    if k is GateKind.TOFFOLI:
        both = {qs[0]: _P1, qs[1]: _P1}
        return np.eye(2 ** n) - _embed(n, both) + _embed(n, {**both, qs[2]: _PAULI["x"]})
    base = {GateKind.CRX: GateKind.RX, GateKind.CRY: GateKind.RY, GateKind.CRZ: GateKind.RZ}[k]
    return _embed(n, {qs[0]: _P0}) + _embed(n, {qs[0]: _P1, qs[1]: gate_matrix(base, angle)})


def dense_unitary_oracle(gates: Sequence[GateInstance], n_qubits: int, inputs=(), thetas=()) -> np.ndarray:
    """Full unitary of ``gates`` by Kronecker products (test oracle, n <= 3)."""
    if n_qubits > ORACLE_MAX_QUBITS:
        raise SimulationError(f"dense oracle refuses {n_qubits} > {ORACLE_MAX_QUBITS} qubits")
    _check_n_qubits(n_qubits)
    inputs = np.asarray(inputs, dtype=np.float64).reshape(1, -1)
    thetas = np.asarray(thetas, dtype=np.float64).reshape(-1)
    u = np.eye(2 ** n_qubits, dtype=complex)
    for g in gates:
        _check_qubits(g, n_qubits)
        a = _bound_angle(g, inputs, thetas)
        if isinstance(a, np.ndarray):
            a = float(a[0])
        u = _dense_gate(n_qubits, g, a) @ u
    return u
