"""Architecture grammar: decisions, genomes, and compilation to gate lists."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .qsim import CompiledPQC, GateInstance, GateKind, InputSlot, ThetaSlot

OPS = ("Reload", "Rx", "Ry", "Rz", "CRx", "CRy", "CRz", "H", "X", "CNOT", "SWAP", "Toffoli")
OP_INDEX = {name: i for i, name in enumerate(OPS)}
N_OPS = len(OPS)

PARAMETERIZED_OPS = frozenset(OP_INDEX[k] for k in ("Rx", "Ry", "Rz", "CRx", "CRy", "CRz"))
TOFFOLI = OP_INDEX["Toffoli"]
# number of partner offsets each op needs
OFFSETS_NEEDED = tuple(
    2 if name == "Toffoli" else 1 if name in ("CRx", "CRy", "CRz", "CNOT", "SWAP") else 0
    for name in OPS
)

GENOME_FORMAT = "hqcc-genome"
GENOME_VERSION = 1


class GenomeError(ValueError):
    pass


class GenomeFormatError(GenomeError):
    pass


def valid_ops(n_qubits: int) -> list[int]:
    """Op indices usable on ``n_qubits``; Toffoli needs two distinct partners."""
    return [i for i in range(N_OPS) if not (i == TOFFOLI and n_qubits < 3)]


@dataclass(frozen=True)
class Decision:
    op: int
    offset1: int | None = None
    offset2: int | None = None

    @classmethod
    def of(cls, name: str, offset1=None, offset2=None) -> "Decision":
        if name not in OP_INDEX:
            raise GenomeError(f"unknown op {name!r}")
        return cls(OP_INDEX[name], offset1, offset2)

    @property
    def name(self) -> str:
        return OPS[self.op]

    @property
    def parameterized(self) -> bool:
        return self.op in PARAMETERIZED_OPS

    def validate(self, n_qubits: int):
        if not 0 <= self.op < N_OPS:
            raise GenomeError(f"op index {self.op} outside 0..{N_OPS - 1}")
        need = OFFSETS_NEEDED[self.op]
        present = [o for o in (self.offset1, self.offset2) if o is not None]
        if len(present) != need or (need == 1 and self.offset1 is None):
            raise GenomeError(f"{self.name} takes {need} offset(s), got {self.offset1}, {self.offset2}")
        for o in present:
            if not 1 <= o <= n_qubits - 1:
                raise GenomeError(f"{self.name} offset {o} outside 1..{n_qubits - 1}")
        if need == 2 and self.offset1 == self.offset2:
            raise GenomeError(f"Toffoli offsets must differ, got {self.offset1} twice")


@dataclass(frozen=True)
class CircuitGenome:
    """L x N decisions, layer-major then qubit order."""

    n_qubits: int
    n_layers: int
    decisions: tuple[Decision, ...]

    def __post_init__(self):
        object.__setattr__(self, "decisions", tuple(self.decisions))
        if self.n_qubits < 1 or self.n_layers < 0:
            raise GenomeError(f"bad genome size {self.n_layers}x{self.n_qubits}")
        if len(self.decisions) != self.n_layers * self.n_qubits:
            raise GenomeError(
                f"expected {self.n_layers * self.n_qubits} decisions, got {len(self.decisions)}"
            )
        for d in self.decisions:
            d.validate(self.n_qubits)

    def layer(self, l: int) -> tuple[Decision, ...]:
        n = self.n_qubits
        return self.decisions[l * n:(l + 1) * n]


def count_params(genome: CircuitGenome) -> int:
    return sum(d.parameterized for d in genome.decisions)


_ROTATIONS = {"Rx": GateKind.RX, "Ry": GateKind.RY, "Rz": GateKind.RZ,
              "CRx": GateKind.CRX, "CRy": GateKind.CRY, "CRz": GateKind.CRZ}


def compile_genome(genome: CircuitGenome) -> CompiledPQC:
    n = genome.n_qubits
    gates = [GateInstance(GateKind.H, (i,)) for i in range(n)]
    gates += [GateInstance(GateKind.RY, (i,), InputSlot(i)) for i in range(n)]
    slot = 0
    for l in range(genome.n_layers):
        for i, d in enumerate(genome.layer(l)):
            name = d.name
            p1 = (i + d.offset1) % n if d.offset1 is not None else None
            if name == "Reload":
                gates.append(GateInstance(GateKind.RY, (i,), InputSlot(i)))
            elif name in ("Rx", "Ry", "Rz"):
                gates.append(GateInstance(_ROTATIONS[name], (i,), ThetaSlot(slot)))
                slot += 1
            elif name in ("CRx", "CRy", "CRz"):
                gates.append(GateInstance(_ROTATIONS[name], (i, p1), ThetaSlot(slot)))
                slot += 1
            elif name in ("H", "X"):
                gates.append(GateInstance(GateKind(name), (i,)))
            elif name == "CNOT":
                gates.append(GateInstance(GateKind.CNOT, (i, p1)))
            elif name == "SWAP":
                gates.append(GateInstance(GateKind.SWAP, (i, p1)))
            else:
                gates.append(GateInstance(GateKind.TOFFOLI, (i, p1, (i + d.offset2) % n)))
    return CompiledPQC(n_qubits=n, n_inputs=n, n_params=slot, gates=tuple(gates))


def random_genome(n_qubits: int, n_layers: int, seed) -> CircuitGenome:
    """Uniform over valid ops per slot, then uniform over valid offsets."""
    if n_qubits < 2 or n_layers < 1:
        raise GenomeError(f"random_genome needs n_qubits >= 2 and n_layers >= 1, got {n_qubits}, {n_layers}")
    rng = np.random.default_rng(seed)
    ops = valid_ops(n_qubits)
    decisions = []
    for _ in range(n_qubits * n_layers):
        op = ops[rng.integers(len(ops))]
        o1 = o2 = None
        if OFFSETS_NEEDED[op] >= 1:
            o1 = int(rng.integers(1, n_qubits))
        if OFFSETS_NEEDED[op] == 2:
            rest = [o for o in range(1, n_qubits) if o != o1]
            o2 = rest[rng.integers(len(rest))]
        decisions.append(Decision(op, o1, o2))
    return CircuitGenome(n_qubits, n_layers, tuple(decisions))


# --- text format -------------------------------------------------------------

def genome_to_dict(genome: CircuitGenome) -> dict:
    decisions = []
    for d in genome.decisions:
        entry = {"op": d.name}
        if d.offset1 is not None:
            entry["offset1"] = d.offset1
        if d.offset2 is not None:
            entry["offset2"] = d.offset2
        decisions.append(entry)
    return {
        "format": GENOME_FORMAT,
        "version": GENOME_VERSION,
        "n_qubits": genome.n_qubits,
        "n_layers": genome.n_layers,
        "decisions": decisions,
    }


def genome_from_dict(doc) -> CircuitGenome:
    if not isinstance(doc, dict):
        raise GenomeFormatError("genome document must be an object")
    if doc.get("format", GENOME_FORMAT) != GENOME_FORMAT:
        raise GenomeFormatError(f"unexpected format {doc.get('format')!r}")
    if doc.get("version") != GENOME_VERSION:
        raise GenomeFormatError(f"unsupported version {doc.get('version')!r}")
    extra = set(doc) - {"format", "version", "n_qubits", "n_layers", "decisions"}
    if extra:
        raise GenomeFormatError(f"unknown key {sorted(extra)[0]!r}")
    try:
        n, L, items = int(doc["n_qubits"]), int(doc["n_layers"]), doc["decisions"]
    except (KeyError, TypeError, ValueError) as e:
        raise GenomeFormatError(f"missing or malformed field: {e}") from None
    if not isinstance(items, list):
        raise GenomeFormatError("'decisions' must be an array")
    if len(items) != n * L:
        raise GenomeFormatError(f"'decisions' has {len(items)} entries, expected {n * L}")
    decisions = []
    for k, item in enumerate(items):
        if not isinstance(item, dict) or "op" not in item:
            raise GenomeFormatError(f"decision {k} must be an object with 'op'")
        bad = set(item) - {"op", "offset1", "offset2"}
        if bad:
            raise GenomeFormatError(f"decision {k}: unknown key {sorted(bad)[0]!r}")
        if item["op"] not in OP_INDEX:
            raise GenomeFormatError(f"decision {k}: unknown op {item['op']!r}")
        try:
            d = Decision.of(item["op"], item.get("offset1"), item.get("offset2"))
            d.validate(n)
        except GenomeError as e:
            raise GenomeFormatError(f"decision {k}: {e}") from None
        decisions.append(d)
    try:
        return CircuitGenome(n, L, tuple(decisions))
    except GenomeError as e:
        raise GenomeFormatError(str(e)) from None


def serialize_genome(genome: CircuitGenome) -> str:
    return json.dumps(genome_to_dict(genome), indent=1) + "\n"


def deserialize_genome(text: str) -> CircuitGenome:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GenomeFormatError(f"not a genome document: {e}") from None
    return genome_from_dict(doc)


def describe(pqc: CompiledPQC) -> str:
    lines = [f"# {pqc.n_qubits} qubits, {pqc.n_inputs} inputs, {pqc.n_params} params, {len(pqc.gates)} gates"]
    lines += [f"{k:4d}  {g}" for k, g in enumerate(pqc.gates)]
    return "\n".join(lines)
