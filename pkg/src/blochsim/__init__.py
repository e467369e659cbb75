"""Density-matrix simulation in the multi-qubit Bloch (Pauli-basis) representation."""

from .bloch import (
    PauliObservable,
    basis_state,
    bloch_from_density,
    density_from_bloch,
    expectation,
    maximally_mixed,
    partial_trace,
    pauli_flat_index,
    pauli_word,
    product_state,
    purity,
    single_qubit_state,
    zero_state,
)
from .channels import (
    KrausChannel,
    amplitude_damping,
    apply_channel,
    bit_flip,
    channel_superop,
    compose_channels,
    depolarizing,
    kraus_superop,
    phase_damping,
    phase_flip,
)
from .circuit import Circuit, GradientReport, Param, backward, cost_expectation_cotangent, forward, grad_gate
from .controlled import ControlledGateSpec, apply_controlled, cnot, cz, toffoli
from .kernels import GateSpec, GateSuperop, apply, apply_gate, builtin_superop, superop_from_unitary
from .lindblad import LindbladGenerator, adjoint_evolve, build_generator, evolve, grad_generator

__version__ = "0.1.0"
