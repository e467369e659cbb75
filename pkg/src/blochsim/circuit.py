"""Circuits of gates, controlled gates and channels with reverse-mode gradients.

The backward pass walks the stages in reverse.  Orthogonal (unitary) stages
recover their input from their output as ``r = U^T r'`` and cache nothing,
while channel stages keep their input from the forward pass.  At each stage the
superop cotangent ``Ubar = Tr_rest[rbar' (x) r]`` is contracted with the
analytic derivative of the superop to give the parameter gradient.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .bloch import PauliObservable, expectation, num_qubits, pauli_flat_index
from .channels import KrausChannel, builtin_channel, channel_derivative, channel_superop
from .controlled import (
    ControlledGateSpec,
    apply_controlled,
    controlled_block_derivatives,
    controlled_block_superop,
)
from .kernels import GateSpec, GateSuperop, apply, builtin_derivatives, builtin_superop, differentiable_params


@dataclass(frozen=True)
class Param:
    """Reference to a named circuit parameter, entering a gate as ``scale * value``."""

    name: str
    scale: float = 1.0


def _as_param(p) -> Param | float:
    if isinstance(p, Param):
        return p
    if isinstance(p, str):
        return Param(p)
    return float(p)


@dataclass(frozen=True, eq=False)
class Stage:
    """One circuit step.

    ``op`` is a :class:`GateSpec`, :class:`ControlledGateSpec` or
    :class:`KrausChannel` whose numeric parameters are placeholders;
    ``bindings`` maps parameter slots to :class:`Param` references.  For a
    controlled gate the slots index the target gate's parameters; a builtin
    channel has the single slot 0.
    """

    op: object
    targets: tuple
    bindings: tuple = ()

    @property
    def kind(self) -> str:
        if isinstance(self.op, ControlledGateSpec):
            return "controlled"
        if isinstance(self.op, KrausChannel):
            return "channel"
        return "gate"

    @property
    def invertible(self) -> bool:
        if self.kind == "channel":
            return False
        if self.kind == "gate":
            return builtin_superop(self.op).kind == "unitary"
        return True

    @property
    def requires_cached_state(self) -> bool:
        return not self.invertible

    def resolve(self, values: Mapping[str, float]):
        """Concrete operation with every binding substituted."""
        if not self.bindings:
            return self.op
        try:
            subs = {slot: p.scale * float(values[p.name]) for slot, p in self.bindings}
        except KeyError as exc:
            raise KeyError(f"unresolved parameter {exc.args[0]!r}") from None
        if self.kind == "channel":
            return self.op.with_param(subs[0])
        gate = self.op.gate if self.kind == "controlled" else self.op
        params = [subs.get(i, v) for i, v in enumerate(gate.params)]
        gate = gate.with_params(params)
        return self.op.with_gate(gate) if self.kind == "controlled" else gate

    @property
    def parameter_names(self) -> tuple:
        return tuple(p.name for _, p in self.bindings)


def _split_params(params: Sequence) -> tuple[list[float], tuple]:
    values, bindings = [], []
    for slot, p in enumerate(params):
        p = _as_param(p)
        if isinstance(p, Param):
            values.append(0.0)
            bindings.append((slot, p))
        else:
            values.append(p)
    return values, tuple(bindings)


class Circuit:
    """Ordered stages on ``n_qubits`` plus a table of parameter values.

    Gate parameters given as strings or :class:`Param` objects are bound to
    entries of ``parameters``; a name used in several places accumulates its
    gradient over all of them.
    """

    def __init__(self, n_qubits: int, stages: Sequence[Stage] = (), parameters: Mapping[str, float] | None = None):
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        self.n_qubits = n_qubits
        self.stages: list[Stage] = []
        self.parameters: dict[str, float] = dict(parameters or {})
        for s in stages:
            self.add(s)

    def __len__(self) -> int:
        return len(self.stages)

    def __repr__(self) -> str:
        return f"Circuit(n_qubits={self.n_qubits}, stages={len(self.stages)}, parameters={self.parameters})"

    def _check_targets(self, qubits: Sequence[int]) -> None:
        for q in qubits:
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"qubit index {q} out of range for {self.n_qubits} qubits")

    def add(self, stage: Stage) -> Circuit:
        self._check_targets(stage.targets)
        if stage.kind == "gate":
            allowed = differentiable_params(stage.op)
            for slot, _ in stage.bindings:
                if slot not in allowed:
                    raise ValueError(f"parameter {slot} of {stage.op.name} cannot be bound")
        self.stages.append(stage)
        return self

    def gate(self, name: str, params: Sequence = (), targets: Sequence[int] = (0,), matrix=None) -> Circuit:
        values, bindings = _split_params(params)
        spec = GateSpec(name, tuple(values), tuple(targets), matrix)
        return self.add(Stage(spec, spec.targets, bindings))

    def controlled(self, controls: Sequence[int], name: str, params: Sequence = (), targets: Sequence[int] = (0,),
                   matrix=None) -> Circuit:
        values, bindings = _split_params(params)
        spec = ControlledGateSpec(tuple(controls), GateSpec(name, tuple(values), tuple(targets), matrix))
        return self.add(Stage(spec, spec.qubits, bindings))

    def channel(self, name_or_channel, param=None, targets: Sequence[int] = (0,)) -> Circuit:
        if isinstance(name_or_channel, KrausChannel):
            ch, bindings = name_or_channel, ()
        else:
            p = _as_param(param)
            if isinstance(p, Param):
                ch, bindings = builtin_channel(name_or_channel, 0.0), ((0, p),)
            else:
                ch, bindings = builtin_channel(name_or_channel, p), ()
        if len(targets) != ch.arity:
            raise ValueError(f"channel acts on {ch.arity} qubit(s), got targets {tuple(targets)}")
        return self.add(Stage(ch, tuple(targets), bindings))

    def parameter_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for s in self.stages:
            for name in s.parameter_names:
                seen.setdefault(name)
        return list(seen)

    def values(self, params: Mapping[str, float] | None = None) -> dict[str, float]:
        out = dict(self.parameters)
        if params is not None:
            out.update(params)
        missing = [n for n in self.parameter_names() if n not in out]
        if missing:
            raise KeyError(f"unresolved parameters {missing}")
        return out


def stage_superop(op) -> GateSuperop:
    """Superop of a resolved stage operation (the full block for controlled gates)."""
    if isinstance(op, ControlledGateSpec):
        return controlled_block_superop(op)
    if isinstance(op, KrausChannel):
        return channel_superop(op)
    return builtin_superop(op)


def _stage_derivatives(op, bindings) -> dict[int, np.ndarray]:
    if isinstance(op, KrausChannel):
        return {0: channel_derivative(op)}
    if isinstance(op, ControlledGateSpec):
        ders = controlled_block_derivatives(op)
    else:
        ders = builtin_derivatives(op)
    out = {}
    for slot, _ in bindings:
        if ders[slot] is None:
            raise ValueError(f"parameter slot {slot} has no derivative")
        out[slot] = ders[slot]
    return out


@dataclass
class ForwardCache:
    """Inputs of the non-invertible stages, keyed by stage index.

    ``superops`` keeps the local superop of every gate and channel stage so the
    backward pass does not rebuild it; only ``states`` counts as cached state.
    """

    states: dict = field(default_factory=dict)
    superops: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)


def forward(
    circuit: Circuit,
    r_in: np.ndarray,
    params: Mapping[str, float] | None = None,
    return_cache: bool = False,
):
    """Apply every stage in order; optionally return the channel-input cache."""
    r = np.array(r_in, dtype=float)
    if num_qubits(r) != circuit.n_qubits:
        raise ValueError(f"state has {num_qubits(r)} qubits, circuit has {circuit.n_qubits}")
    values = circuit.values(params)
    cache = ForwardCache()
    for i, stage in enumerate(circuit.stages):
        op = stage.resolve(values)
        if stage.requires_cached_state:
            cache.states[i] = r.copy()
        if stage.kind == "controlled":
            r = apply_controlled(r, op)
        else:
            sup = cache.superops[i] = stage_superop(op)
            r = apply(r, sup, stage.targets)
    return (r, cache) if return_cache else r


def _target_matrix(x: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    # Reorder to (rest..., t_{m-1}, ..., t_0) so that the trailing block is the local index.
    t = x.reshape((4,) * n)
    axes = [n - 1 - q for q in reversed(list(targets))]
    rest = [a for a in range(n) if a not in axes]
    return t.transpose(rest + axes).reshape(-1, 4 ** len(targets))


def grad_gate(rbar_prime: np.ndarray, r: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Superop cotangent ``Ubar[J, K] = sum_rest rbar'[J, rest] r[K, rest]``.

    This is the outer product ``rbar' (x) r`` traced over the qubits the stage
    does not touch, formed without materialising the full outer product.
    """
    rbar_prime = np.asarray(rbar_prime, dtype=float)
    r = np.asarray(r, dtype=float)
    if rbar_prime.shape != r.shape:
        raise ValueError("cotangent and state shapes differ")
    n = num_qubits(r)
    targets = list(targets)
    if len(set(targets)) != len(targets) or any(not 0 <= q < n for q in targets):
        raise ValueError(f"invalid targets {targets} for {n} qubits")
    a = _target_matrix(rbar_prime, targets, n)
    b = _target_matrix(r, targets, n)
    return a.T @ b


@dataclass
class GradientReport:
    """Result of a backward pass.

    ``params`` maps parameter names to ``dC/dtheta``; ``stage_grads[i]`` is the
    superop cotangent of stage ``i`` when requested; ``rbar_in`` is ``dC/dr_in``
    and ``r_in`` the input state recovered by the backward sweep.
    """

    params: dict
    rbar_in: np.ndarray
    r_in: np.ndarray
    stage_grads: list | None = None
    cached_states: int = 0


def backward(
    circuit: Circuit,
    r_out: np.ndarray,
    rbar_out: np.ndarray,
    cache: ForwardCache | None = None,
    params: Mapping[str, float] | None = None,
    keep_stage_grads: bool = False,
) -> GradientReport:
    """Reverse sweep from the output state and its cotangent."""
    rbar = np.array(rbar_out, dtype=float)
    r = np.array(r_out, dtype=float)
    if not np.all(np.isfinite(rbar)):
        raise ValueError("cotangent has non-finite entries")
    cache = cache or ForwardCache()
    values = circuit.values(params)
    grads = {name: 0.0 for name in circuit.parameter_names()}
    stage_grads: list | None = [None] * len(circuit.stages) if keep_stage_grads else None
    for i in reversed(range(len(circuit.stages))):
        stage = circuit.stages[i]
        op = stage.resolve(values)
        sup = cache.superops.get(i) or stage_superop(op)
        if stage.requires_cached_state:
            if i not in cache.states:
                raise ValueError(f"stage {i} needs its cached input state")
            r_prev = cache.states[i]
        else:
            r_prev = apply(r, sup.T, stage.targets)
        if stage.bindings or keep_stage_grads:
            ubar = grad_gate(rbar, r_prev, stage.targets)
            if keep_stage_grads:
                stage_grads[i] = ubar
            for slot, dk in _stage_derivatives(op, stage.bindings).items():
                p = dict(stage.bindings)[slot]
                grads[p.name] += p.scale * float(np.sum(ubar * dk))
        rbar = apply(rbar, sup.T, stage.targets)
        r = r_prev
    return GradientReport(grads, rbar, r, stage_grads, len(cache))


def cost_expectation_cotangent(obs: PauliObservable, n_qubits: int | None = None) -> np.ndarray:
    """``d(sum_J m_J r_J)/dr``: the observable's coefficients at their flat indices."""
    n = obs.n_qubits if n_qubits is None else n_qubits
    out = np.zeros(4**n)
    for coeff, word in obs.terms:
        out[pauli_flat_index(word)] += coeff
    return out


def expectation_and_gradient(
    circuit: Circuit,
    r_in: np.ndarray,
    obs: PauliObservable,
    params: Mapping[str, float] | None = None,
) -> tuple[float, GradientReport]:
    """``Tr[M rho_out]`` and its gradient report."""
    r_out, cache = forward(circuit, r_in, params, return_cache=True)
    report = backward(circuit, r_out, cost_expectation_cotangent(obs, circuit.n_qubits), cache, params)
    return expectation(r_out, obs), report


def finite_difference_gradients(
    cost: Callable[[Mapping[str, float]], float],
    params: Mapping[str, float],
    h: float = 1e-5,
) -> dict[str, float]:
    """Central differences of ``cost`` for every entry of ``params``."""
    out = {}
    for name in params:
        up = dict(params)
        down = dict(params)
        up[name] += h
        down[name] -= h
        out[name] = (cost(up) - cost(down)) / (2 * h)
    return out


def expectation_cost(circuit: Circuit, r_in: np.ndarray, obs: PauliObservable):
    """``params -> Tr[M rho_out]`` for use with :func:`finite_difference_gradients`."""
    return lambda params: expectation(forward(circuit, r_in, params), obs)
