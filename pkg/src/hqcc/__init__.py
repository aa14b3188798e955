"""Hybrid quantum-classical image classifier with LSTM-driven circuit search."""

from .circuit import CircuitGenome, Decision, compile_genome, count_params, random_genome
from .qsim import CompiledPQC, GateInstance, GateKind
from .vqcl import QuantumFilter, vqcl_backward, vqcl_forward

__all__ = [
    "CircuitGenome", "CompiledPQC", "Decision", "GateInstance", "GateKind", "QuantumFilter",
    "compile_genome", "count_params", "random_genome", "vqcl_backward", "vqcl_forward",
]
