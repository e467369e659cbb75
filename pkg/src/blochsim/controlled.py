"""Controlled gates on Bloch vectors.

For ``CU = I + P^{(x)k} (x) (U - I)`` with ``P = |1><1|`` the conjugation splits
into three pieces::

    CU rho CU^dagger = rho
                     + 2 S_{P^{(x)k} (x) (U - I)}(rho)
                     + P^{(x)k} (U rho U^dagger - 2 S_U(rho) + rho) P^{(x)k}

The symmetric sandwich of the tensor product expands into ``2**k`` products
of per-qubit ``S``/``A`` maps, so every piece reduces to one-qubit kernels on
the controls plus the ordinary kernel for ``U`` on its targets.
"""

from __future__ import annotations

import functools
import itertools
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .bloch import num_qubits
from .kernels import (
    GateSpec,
    GateSuperop,
    antisym_superop,
    apply,
    apply_1q,
    builtin_antisym_superop,
    builtin_superop,
    builtin_sym_superop,
    gate_unitary,
    gate_unitary_derivatives,
    has_closed_sym_antisym,
    superop_derivative_from_unitary,
    superop_from_unitary,
    sym_superop,
)

_PROJ1 = GateSpec("Proj1")
PROJ1_CONJ = builtin_superop(_PROJ1)
PROJ1_SYM = builtin_sym_superop(_PROJ1)
PROJ1_ANTISYM = builtin_antisym_superop(_PROJ1)


@dataclass(frozen=True)
class SATerm:
    """One product term of the ``S_{P^{(x)k} (x) (U - I)}`` expansion.

    ``bits[i]`` selects ``S`` (0) or ``A`` (1) on control ``i``.
    """

    bits: tuple

    @property
    def sign(self) -> int:
        return -1 if (sum(self.bits) + 1) // 2 % 2 else 1

    @property
    def target_kind(self) -> int:
        """0 for ``S_{U-I}``, 1 for ``A_{U-I}``."""
        return sum(self.bits) % 2


def enumerate_sa_terms(k: int) -> list[SATerm]:
    if k < 1:
        raise ValueError("need at least one control")
    return [SATerm(tuple(reversed(bits))) for bits in itertools.product((0, 1), repeat=k)]


@dataclass(frozen=True)
class ControlledGateSpec:
    """Gate ``gate`` that fires when every qubit in ``controls`` is ``|1>``."""

    controls: tuple
    gate: GateSpec

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        if not self.controls:
            raise ValueError("need at least one control")
        if len(set(self.controls)) != len(self.controls):
            raise ValueError(f"duplicate controls {self.controls}")
        if set(self.controls) & set(self.gate.targets):
            raise ValueError(f"controls {self.controls} overlap targets {self.gate.targets}")

    @property
    def qubits(self) -> tuple:
        """Block order used for the dense local matrix: targets first, then controls."""
        return self.gate.targets + self.controls

    def with_gate(self, gate: GateSpec) -> ControlledGateSpec:
        return ControlledGateSpec(self.controls, gate)

    @functools.cached_property
    def target_superop(self) -> GateSuperop:
        return builtin_superop(self.gate)

    @functools.cached_property
    def target_sym(self) -> GateSuperop:
        if has_closed_sym_antisym(self.gate.name):
            return builtin_sym_superop(self.gate)
        return sym_superop(gate_unitary(self.gate))

    @functools.cached_property
    def target_antisym(self) -> GateSuperop:
        if has_closed_sym_antisym(self.gate.name):
            return builtin_antisym_superop(self.gate)
        return antisym_superop(gate_unitary(self.gate))

    @functools.cached_property
    def _pieces(self):
        eye = np.eye(4**self.gate.arity)
        s_minus = GateSuperop(self.target_sym.matrix - eye, "sym")
        last = GateSuperop(self.target_superop.matrix - 2 * self.target_sym.matrix + eye, "channel")
        return s_minus, self.target_antisym, last


def cnot(control: int, target: int) -> ControlledGateSpec:
    return ControlledGateSpec((control,), GateSpec("X", (), (target,)))


def cz(control: int, target: int) -> ControlledGateSpec:
    return ControlledGateSpec((control,), GateSpec("Z", (), (target,)))


def toffoli(control_a: int, control_b: int, target: int) -> ControlledGateSpec:
    return ControlledGateSpec((control_a, control_b), GateSpec("X", (), (target,)))


def _check(r: np.ndarray, spec: ControlledGateSpec) -> None:
    n = num_qubits(r)
    for q in spec.qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n} qubits")


def _middle_terms(r: np.ndarray, spec: ControlledGateSpec) -> np.ndarray:
    s_minus, antisym, _ = spec._pieces
    targets = spec.gate.targets
    acc = np.zeros_like(r)
    for term in enumerate_sa_terms(len(spec.controls)):
        # Apply the control factors from the last control down to the first, then the target.
        y = r
        for bit, q in reversed(list(zip(term.bits, spec.controls))):
            y = apply_1q(y, PROJ1_ANTISYM if bit else PROJ1_SYM, q)
        y = apply(y, antisym if term.target_kind else s_minus, targets)
        acc += term.sign * y
    return acc


def _middle_mpo(r: np.ndarray, spec: ControlledGateSpec) -> np.ndarray:
    s_minus, antisym, _ = spec._pieces
    targets = spec.gate.targets
    s = apply(r, s_minus, targets)
    a = apply(r, antisym, targets)
    for q in spec.controls:
        s, a = (
            apply_1q(s, PROJ1_SYM, q) - apply_1q(a, PROJ1_ANTISYM, q),
            apply_1q(s, PROJ1_ANTISYM, q) + apply_1q(a, PROJ1_SYM, q),
        )
    return s


def apply_controlled(r: np.ndarray, spec: ControlledGateSpec, method: str = "terms") -> np.ndarray:
    """Conjugate ``r`` by the controlled gate.

    ``method="terms"`` sums the ``2**k`` sandwich products one pass at a
    time; ``method="mpo"`` carries the ``(S, A)`` pair through the controls
    as a bond-dimension-two sweep (``4k + 2`` kernel calls instead of
    ``2**k (k + 1)``).
    """
    r = np.asarray(r, dtype=float)
    _check(r, spec)
    if method == "terms":
        middle = _middle_terms(r, spec)
    elif method == "mpo":
        middle = _middle_mpo(r, spec)
    else:
        raise ValueError(f"unknown method {method!r}")
    _, _, last_op = spec._pieces
    last = apply(r, last_op, spec.gate.targets)
    for q in spec.controls:
        last = apply_1q(last, PROJ1_CONJ, q)
    return r + 2 * middle + last


def controlled_local_unitary(spec: ControlledGateSpec) -> np.ndarray:
    """Dense ``CU`` on the block ``spec.qubits`` (controls are the high bits)."""
    u = gate_unitary(spec.gate)
    k = len(spec.controls)
    proj = np.zeros((2**k, 2**k))
    proj[-1, -1] = 1.0
    return np.eye(2**k * u.shape[0]) + np.kron(proj, u - np.eye(u.shape[0]))


def controlled_block_superop(spec: ControlledGateSpec) -> GateSuperop:
    """Full ``CU`` superop on the block ``spec.qubits``."""
    return superop_from_unitary(controlled_local_unitary(spec))


def controlled_block_derivatives(spec: ControlledGateSpec) -> list[np.ndarray | None]:
    """``dK/dp`` of the block superop for each target-gate parameter."""
    cu = controlled_local_unitary(spec)
    k = len(spec.controls)
    proj = np.zeros((2**k, 2**k))
    proj[-1, -1] = 1.0
    out = []
    for du in gate_unitary_derivatives(spec.gate):
        out.append(None if du is None else superop_derivative_from_unitary(cu, np.kron(proj, du)))
    return out


def sa_tensor_mpo(factors: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """``(S, A)`` superops of ``G_{n-1} (x) ... (x) G_0`` by the 2x2 block recursion.

    ``factors[0]`` is ``G_0`` (the least significant factor).  Each step is
    the complex-multiplication rule ``S' = S_j S - A_j A``, ``A' = A_j S + S_j A``
    with the new factor Kronecker-multiplied on the left.
    """
    if not factors:
        raise ValueError("need at least one factor")
    s = sym_superop(factors[0]).matrix
    a = antisym_superop(factors[0]).matrix
    for g in factors[1:]:
        sg = sym_superop(g).matrix
        ag = antisym_superop(g).matrix
        s, a = np.kron(sg, s) - np.kron(ag, a), np.kron(ag, s) + np.kron(sg, a)
    return s, a
