"""Kraus channels in the Bloch picture.

A channel ``rho -> sum_k E_k rho E_k^dagger`` becomes the real matrix
``E[j, k] = 2**-m sum_kappa Tr[sigma_j E_kappa sigma_k E_kappa^dagger]`` and is
applied with the same strided kernels as gates.

Builtin noise channels use the textbook Kraus operators; note that for the
bit and phase flip ``p`` is the probability of leaving the state untouched.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .controlled import ControlledGateSpec, apply_controlled
from .kernels import GateSpec, GateSuperop, apply, builtin_superop, pauli_basis, superop_of_map

COMPLETENESS_TOL = 1e-10

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Parameter name used by each builtin in JSON and in ``KrausChannel.param_name``.
PARAM_NAMES = {
    "bit_flip": "p",
    "phase_flip": "p",
    "depolarizing": "p",
    "amplitude_damping": "gamma",
    "phase_damping": "lambda",
}


def _kraus_operators(name: str, p: float) -> list[np.ndarray]:
    if name == "bit_flip":
        return [np.sqrt(p) * _I2, np.sqrt(1 - p) * _X]
    if name == "phase_flip":
        return [np.sqrt(p) * _I2, np.sqrt(1 - p) * _Z]
    if name == "depolarizing":
        return [np.sqrt(1 - 3 * p / 4) * _I2, np.sqrt(p) * _X / 2, np.sqrt(p) * _Y / 2, np.sqrt(p) * _Z / 2]
    if name == "amplitude_damping":
        return [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex), np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)]
    if name == "phase_damping":
        return [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex), np.array([[0, 0], [0, np.sqrt(p)]], dtype=complex)]
    raise ValueError(f"unknown channel {name!r}")


def _closed_form(name: str, p: float) -> np.ndarray:
    if name == "bit_flip":
        return np.diag([1.0, 1.0, 2 * p - 1, 2 * p - 1])
    if name == "phase_flip":
        return np.diag([1.0, 2 * p - 1, 2 * p - 1, 1.0])
    if name == "depolarizing":
        return np.diag([1.0, 1 - p, 1 - p, 1 - p])
    if name == "amplitude_damping":
        mat = np.diag([1.0, np.sqrt(1 - p), np.sqrt(1 - p), 1 - p])
        mat[3, 0] = p
        return mat
    if name == "phase_damping":
        return np.diag([1.0, np.sqrt(1 - p), np.sqrt(1 - p), 1.0])
    raise ValueError(f"unknown channel {name!r}")


def _closed_form_derivative(name: str, p: float) -> np.ndarray:
    if name == "bit_flip":
        return np.diag([0.0, 0.0, 2.0, 2.0])
    if name == "phase_flip":
        return np.diag([0.0, 2.0, 2.0, 0.0])
    if name == "depolarizing":
        return np.diag([0.0, -1.0, -1.0, -1.0])
    if name in ("amplitude_damping", "phase_damping"):
        if p >= 1:
            raise ValueError(f"{name} is not differentiable at parameter 1")
        d = -0.5 / np.sqrt(1 - p)
        mat = np.diag([0.0, d, d, 0.0])
        if name == "amplitude_damping":
            mat[3, 0], mat[3, 3] = 1.0, -1.0
        return mat
    raise ValueError(f"unknown channel {name!r}")


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A trace-preserving channel given by its Kraus operators.

    Builtins carry ``name`` and ``param``; custom channels leave both ``None``.
    """

    operators: tuple
    name: str | None = None
    param: float | None = None
    arity: int = field(init=False)

    def __post_init__(self):
        ops = tuple(np.asarray(e, dtype=complex) for e in self.operators)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        m = dim.bit_length() - 1
        if m < 1 or 2**m != dim or any(e.shape != (dim, dim) for e in ops):
            raise ValueError("Kraus operators must all be 2**m square matrices")
        err = np.max(np.abs(sum(e.conj().T @ e for e in ops) - np.eye(dim)))
        if err > COMPLETENESS_TOL:
            raise ValueError(f"Kraus operators are not complete (max deviation {err:.3e})")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "arity", m)

    @property
    def param_name(self) -> str | None:
        return PARAM_NAMES.get(self.name) if self.name else None

    @property
    def is_unital(self) -> bool:
        out = sum(e @ e.conj().T for e in self.operators)
        return bool(np.max(np.abs(out - np.eye(out.shape[0]))) <= COMPLETENESS_TOL)

    def with_param(self, value: float) -> KrausChannel:
        if self.name is None:
            raise ValueError("custom channels have no parameter")
        return builtin_channel(self.name, value)


def builtin_channel(name: str, param: float) -> KrausChannel:
    param = float(param)
    if not 0.0 <= param <= 1.0:
        raise ValueError(f"{name} parameter must lie in [0, 1], got {param}")
    return KrausChannel(tuple(_kraus_operators(name, param)), name, param)


def bit_flip(p: float) -> KrausChannel:
    return builtin_channel("bit_flip", p)


def phase_flip(p: float) -> KrausChannel:
    return builtin_channel("phase_flip", p)


def depolarizing(p: float) -> KrausChannel:
    return builtin_channel("depolarizing", p)


def amplitude_damping(gamma: float) -> KrausChannel:
    return builtin_channel("amplitude_damping", gamma)


def phase_damping(lam: float) -> KrausChannel:
    return builtin_channel("phase_damping", lam)


def kraus_superop(operators: Sequence[np.ndarray]) -> GateSuperop:
    """Generic projection of a Kraus sum onto the Pauli basis."""
    ops = [np.asarray(e, dtype=complex) for e in operators]
    m = ops[0].shape[0].bit_length() - 1
    basis = pauli_basis(m)
    images = sum(e @ basis @ e.conj().T for e in ops)
    return GateSuperop(superop_of_map(images), "channel")


def channel_superop(ch: KrausChannel) -> GateSuperop:
    """Bloch matrix of the channel; closed form for builtins."""
    if ch.name is not None:
        return GateSuperop(_closed_form(ch.name, ch.param), "channel")
    return kraus_superop(ch.operators)


def channel_derivative(ch: KrausChannel) -> np.ndarray:
    """``dE/dparam`` of a builtin channel's Bloch matrix."""
    if ch.name is None:
        raise ValueError("custom channels have no parameter")
    return _closed_form_derivative(ch.name, ch.param)


def apply_channel(r: np.ndarray, ch: KrausChannel, targets: Sequence[int], inplace: bool = False) -> np.ndarray:
    targets = list(targets)
    if len(targets) != ch.arity:
        raise ValueError(f"channel acts on {ch.arity} qubit(s), got targets {targets}")
    return apply(r, channel_superop(ch), targets, inplace)


@dataclass
class PipelineStage:
    op: object
    targets: tuple
    superop: GateSuperop | None = None
    # Non-invertible stages need their input kept for a backward pass.
    requires_cached_state: bool = False


class Pipeline:
    """Sequential composition of gates, controlled gates and channels."""

    def __init__(self, stages: Sequence[PipelineStage]):
        self.stages = list(stages)

    def __len__(self) -> int:
        return len(self.stages)

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.array(r, dtype=float)
        for stage in self.stages:
            if isinstance(stage.op, ControlledGateSpec):
                r = apply_controlled(r, stage.op)
            else:
                r = apply(r, stage.superop, stage.targets)
        return r

    __call__ = apply


def compose_channels(items: Sequence) -> Pipeline:
    """Build a pipeline from ``(op, targets)`` pairs.

    ``op`` may be a :class:`KrausChannel`, :class:`GateSpec` (its own targets
    are replaced), :class:`GateSuperop` or controlled gate (``targets`` is
    ignored and may be ``None``).  Stages run in list order.
    """
    stages = []
    for op, targets in items:
        if isinstance(op, ControlledGateSpec):
            stages.append(PipelineStage(op, op.qubits))
        elif isinstance(op, KrausChannel):
            stages.append(PipelineStage(op, tuple(targets), channel_superop(op), True))
        elif isinstance(op, GateSpec):
            spec = op.with_targets(targets) if targets is not None else op
            sup = builtin_superop(spec)
            stages.append(PipelineStage(spec, spec.targets, sup, sup.kind != "unitary"))
        elif isinstance(op, GateSuperop):
            stages.append(PipelineStage(op, tuple(targets), op, op.kind != "unitary"))
        else:
            raise TypeError(f"cannot compose object of type {type(op).__name__}")
    return Pipeline(stages)
