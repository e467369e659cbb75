"""Lindblad dynamics on Bloch vectors.

The GKSL equation becomes the linear ODE ``dr/dt = L r`` with the real
generator::

    L = -2 A_H + sum_q (conj(L_q) - S_{L_q^dagger L_q})

where ``A_G``/``S_G`` are the antisymmetric/symmetric sandwich superops and
``conj(E)`` is the Bloch matrix of ``rho -> E rho E^dagger``.  The adjoint
state obeys ``d rbar/dt = -L^T rbar`` backward in time, and gradients with
respect to the generator follow from integrating ``rbar (x) r`` along paired
trajectories.

The generator is stored densely, so memory grows as ``16**n``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bloch import PauliObservable, num_qubits
from .kernels import conjugation_superop, lift_superop, sym_superop

MAX_QUBITS = 8
DEFAULT_DT = 1e-3

# Single-qubit Pauli products: sigma_a sigma_b = _PHASE[a, b] * sigma_{a ^ b}
# (the I, X, Y, Z <-> 0..3 labelling makes the product index an XOR).
_PHASE = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, 1j, -1j],
        [1, -1j, 1, 1j],
        [1, 1j, -1j, 1],
    ]
)


@dataclass(frozen=True)
class JumpOperator:
    """Jump operator ``sqrt(rate) * matrix`` acting on ``targets``.

    ``rate`` may name a parameter, resolved by :func:`build_generator`.
    """

    matrix: np.ndarray
    targets: tuple
    rate: float | str = 1.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.matrix.shape != (2 ** len(self.targets),) * 2:
            raise ValueError(
                f"jump matrix of shape {self.matrix.shape} does not match {len(self.targets)} target(s)"
            )


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    """Dense real generator with optional parameter derivatives.

    ``derivatives[name]`` is ``dL/dtheta`` for every parameter the generator
    depends on; ``params`` holds the values it was built with.
    """

    matrix: np.ndarray
    hamiltonian: PauliObservable | None = None
    jumps: tuple = ()
    params: dict = field(default_factory=dict)
    derivatives: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return num_qubits(self.matrix[0])

    def __call__(self, t: float) -> np.ndarray:
        return self.matrix


def _digits(n: int) -> np.ndarray:
    idx = np.arange(4**n)
    return np.stack([(idx >> (2 * q)) & 3 for q in range(n)])


def hamiltonian_superop(H: PauliObservable, n_qubits: int | None = None) -> np.ndarray:
    """``-2 A_H``, the Bloch matrix of ``rho -> -i [H, rho]``.

    Built term by term from the Pauli product table: ``[sigma_L, sigma_K]`` is
    ``2 sigma_L sigma_K`` when the strings anticommute and zero otherwise.
    """
    n = H.n_qubits if n_qubits is None else n_qubits
    if H.n_qubits != n:
        raise ValueError(f"Hamiltonian acts on {H.n_qubits} qubits, expected {n}")
    dim = 4**n
    out = np.zeros((dim, dim))
    if not H.terms:
        return out
    cols = np.arange(dim)
    dk = _digits(n)
    for coeff, index in zip(H.coefficients(), H.indices()):
        dl = np.array([(index >> (2 * q)) & 3 for q in range(n)])[:, None]
        phase = np.prod(_PHASE[dl, dk], axis=0)
        rows = np.sum((dl ^ dk) << (2 * np.arange(n))[:, None], axis=0)
        # -i * coeff * 2 * phase for anticommuting pairs (phase is +-i there).
        anti = np.abs(phase.imag) > 0.5
        out[rows[anti], cols[anti]] += 2 * coeff * phase[anti].imag
    return out


def dissipator_superop(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """``conj(L) - S_{L^dagger L}`` lifted to the full register."""
    op = np.asarray(op, dtype=complex)
    local = conjugation_superop(op).matrix - sym_superop(op.conj().T @ op).matrix
    return lift_superop(local, list(targets), n_qubits)


def _as_jump(j) -> JumpOperator:
    if isinstance(j, JumpOperator):
        return j
    if isinstance(j, Mapping):
        return JumpOperator(j["matrix"], j["targets"], j.get("rate", 1.0))
    return JumpOperator(*j)


def build_generator(
    H: PauliObservable | None,
    jumps: Sequence = (),
    n_qubits: int | None = None,
    params: Mapping[str, float] | None = None,
    hamiltonian_params: Mapping[str, PauliObservable] | None = None,
    max_qubits: int = MAX_QUBITS,
) -> LindbladGenerator:
    """Assemble ``L`` for ``H + sum_name theta_name H_name`` and the given jumps.

    ``jumps`` holds :class:`JumpOperator` objects, ``(matrix, targets[, rate])``
    tuples or ``{"matrix", "targets", "rate"}`` dicts.  Named rates and the
    ``hamiltonian_params`` pieces make ``L`` affine in the parameters, and
    their derivatives are recorded on the result.
    """
    params = dict(params or {})
    hamiltonian_params = dict(hamiltonian_params or {})
    jumps = tuple(_as_jump(j) for j in jumps)
    if n_qubits is None:
        if H is None:
            raise ValueError("n_qubits is required without a Hamiltonian")
        n_qubits = H.n_qubits
    n = n_qubits
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds the dense generator cap of {max_qubits}")
    for j in jumps:
        if any(not 0 <= t < n for t in j.targets) or len(set(j.targets)) != len(j.targets):
            raise ValueError(f"invalid jump targets {j.targets} for {n} qubits")
    dim = 4**n
    mat = np.zeros((dim, dim))
    derivs: dict[str, np.ndarray] = {}
    if H is not None:
        mat += hamiltonian_superop(H, n)
    for name, piece in hamiltonian_params.items():
        if name not in params:
            raise KeyError(f"no value for Hamiltonian parameter {name!r}")
        d = hamiltonian_superop(piece, n)
        derivs[name] = derivs.get(name, 0) + d
        mat += params[name] * d
    for j in jumps:
        d = dissipator_superop(j.matrix, j.targets, n)
        if isinstance(j.rate, str):
            if j.rate not in params:
                raise KeyError(f"no value for rate parameter {j.rate!r}")
            derivs[j.rate] = derivs.get(j.rate, 0) + d
            mat += params[j.rate] * d
        else:
            mat += float(j.rate) * d
    return LindbladGenerator(mat, H, jumps, params, derivs)


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray
    method: str
    dt: float | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _matrix_fn(gen) -> tuple[Callable[[float], np.ndarray], bool]:
    """Return ``t -> L(t)`` and whether it is time independent."""
    if isinstance(gen, LindbladGenerator):
        return gen, True
    if callable(gen):
        return gen, False
    mat = np.asarray(gen, dtype=float)
    return (lambda t: mat), True


def time_grid(t_f: float, dt: float) -> np.ndarray:
    """Uniform grid from 0 to ``t_f`` with ``ceil(t_f / dt)`` steps."""
    if t_f < 0:
        raise ValueError(f"t_f must be non-negative, got {t_f}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    steps = math.ceil(t_f / dt - 1e-9) if t_f > 0 else 0
    return np.linspace(0.0, t_f, steps + 1)


def _rk4(f: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.empty((len(times), len(y0)))
    out[0] = y = np.array(y0, dtype=float)
    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        out[i + 1] = y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return out


def evolve(
    r0: np.ndarray,
    gen,
    t_f: float,
    method: str = "expm",
    dt: float | None = None,
    times: Sequence[float] | None = None,
) -> EvolutionResult:
    """Integrate ``dr/dt = L r`` from 0 to ``t_f``.

    ``method="expm"`` evaluates ``expm(L t) r0`` at ``times`` (default
    ``[0, t_f]``, or the RK4 grid when ``dt`` is given).  ``method="rk4"`` takes
    ``ceil(t_f / dt)`` classical fourth-order steps and keeps every state, as
    needed by :func:`adjoint_evolve`.  Time-dependent generators are callables
    ``t -> L(t)`` and need ``rk4``.
    """
    r0 = np.asarray(r0, dtype=float)
    if t_f < 0:
        raise ValueError(f"t_f must be non-negative, got {t_f}")
    fn, static = _matrix_fn(gen)
    if method == "expm":
        if not static:
            raise ValueError("expm needs a time-independent generator")
        if times is None:
            times = time_grid(t_f, dt) if dt is not None else np.array([0.0, t_f])
        times = np.asarray(times, dtype=float)
        mat = fn(0.0)
        states = np.stack([scipy.linalg.expm(mat * t) @ r0 for t in times])
        return EvolutionResult(times, states, "expm", dt)
    if method == "rk4":
        dt = DEFAULT_DT if dt is None else dt
        grid = time_grid(t_f, dt)
        if static:
            mat = fn(0.0)
            states = _rk4(lambda t, y: mat @ y, r0, grid)
        else:
            states = _rk4(lambda t, y: fn(t) @ y, r0, grid)
        step = grid[1] - grid[0] if len(grid) > 1 else dt
        return EvolutionResult(grid, states, "rk4", step)
    raise ValueError(f"unknown method {method!r}")


def adjoint_evolve(rbar_f: np.ndarray, gen, forward: EvolutionResult) -> EvolutionResult:
    """Integrate ``d rbar/dt = -L(t)^T rbar`` backward from ``rbar(t_f)``.

    Uses RK4 on the same grid as ``forward``; the returned states are ordered
    by increasing time, so ``states[0]`` is ``rbar(0)``.
    """
    if forward is None or forward.method != "rk4":
        raise ValueError("the adjoint pass needs an rk4 forward trajectory")
    fn, static = _matrix_fn(gen)
    rev = forward.times[::-1]
    if static:
        mat_t = np.ascontiguousarray(fn(0.0).T)
        states = _rk4(lambda t, y: -(mat_t @ y), rbar_f, rev)
    else:
        states = _rk4(lambda t, y: -(fn(t).T @ y), rbar_f, rev)
    return EvolutionResult(forward.times, states[::-1].copy(), "rk4", forward.dt)


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros(len(times))
    if len(times) > 1:
        h = np.diff(times)
        w[:-1] += h / 2
        w[1:] += h / 2
    return w


def _check_aligned(forward: EvolutionResult, adjoint: EvolutionResult) -> None:
    if len(forward.times) != len(adjoint.times) or not np.allclose(forward.times, adjoint.times, rtol=0, atol=1e-12):
        raise ValueError("forward and adjoint trajectories live on different grids")


def grad_generator(forward: EvolutionResult, adjoint: EvolutionResult) -> np.ndarray:
    """``Lbar = int rbar(t) (x) r(t) dt`` by the trapezoid rule on the shared grid."""
    _check_aligned(forward, adjoint)
    w = _trapezoid_weights(forward.times)
    return (adjoint.states * w[:, None]).T @ forward.states


def grad_parameter_timedep(
    dgen: np.ndarray | Callable[[float], np.ndarray],
    forward: EvolutionResult,
    adjoint: EvolutionResult,
) -> float:
    """``theta_bar = int rbar(t)^T dL/dtheta(t) r(t) dt`` by the trapezoid rule."""
    if dgen is None:
        raise ValueError("a derivative dL/dtheta is required")
    _check_aligned(forward, adjoint)
    w = _trapezoid_weights(forward.times)
    if callable(dgen):
        vals = [a @ (dgen(t) @ r) for t, a, r in zip(forward.times, adjoint.states, forward.states)]
    else:
        d = np.asarray(dgen, dtype=float)
        vals = np.einsum("ti,ij,tj->t", adjoint.states, d, forward.states)
    return float(np.dot(w, vals))


def expectation_gradients(
    gen: LindbladGenerator,
    r0: np.ndarray,
    cotangent: np.ndarray,
    t_f: float,
    dt: float = DEFAULT_DT,
) -> dict:
    """Adjoint gradients of ``C = cotangent . r(t_f)``.

    Returns the cost, ``dC/dr0``, ``Lbar`` and ``dC/dtheta`` for every parameter
    recorded on ``gen``.
    """
    fwd = evolve(r0, gen, t_f, method="rk4", dt=dt)
    adj = adjoint_evolve(np.asarray(cotangent, dtype=float), gen, fwd)
    lbar = grad_generator(fwd, adj)
    params = {name: float(np.sum(lbar * d)) for name, d in gen.derivatives.items()}
    return {
        "cost": float(np.dot(cotangent, fwd.final)),
        "r0_bar": adj.states[0],
        "generator_bar": lbar,
        "params": params,
        "forward": fwd,
        "adjoint": adj,
    }
