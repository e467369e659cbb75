"""Variational quantum thermalizer on Bloch vectors.

The model state is a diagonal product latent ``rho_theta`` conjugated by a
layered circuit ``U_phi``::

    rho_{theta,phi} = U_phi rho_theta U_phi^dagger

and the parameters minimise ``-S(rho) + beta Tr[H rho]``, which equals the
relative entropy to the Gibbs state ``exp(-beta H) / Z`` up to the constant
``-log Z``.  The entropy is unitarily invariant, so it is evaluated on the
latent product directly; the energy and its gradient come from one forward
and one backward pass through the circuit.
"""

from __future__ import annotations

import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bloch import PauliObservable, bloch_from_density, density_from_bloch, product_state
from .circuit import Circuit, backward, cost_expectation_cotangent, forward

PSD_TOL = 1e-9
DEFAULT_LAYERS = 3


def heisenberg_1d(n: int, J: float, g: float, h: float) -> PauliObservable:
    """Open chain ``-J sum S_i . S_{i+1} + g sum S^x + h sum S^z`` with ``S = sigma / 2``."""
    if n < 2:
        raise ValueError("the chain needs at least two sites")
    terms = []
    for i in range(n - 1):
        for p in "XYZ":
            terms.append((-J / 4, _word(n, {i: p, i + 1: p})))
    for i in range(n):
        terms.append((g / 2, _word(n, {i: "X"})))
        terms.append((h / 2, _word(n, {i: "Z"})))
    return PauliObservable(terms, n_qubits=n)


def heisenberg_2d(rows: int, cols: int, J_h: float, J_v: float) -> PauliObservable:
    """``sum J_h S_i . S_j`` over horizontal bonds and ``J_v`` over vertical ones.

    Site ``(r, c)`` is qubit ``r * cols + c`` (row-major), and the lattice has
    open boundaries.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("the lattice needs at least two sites")
    n = rows * cols
    terms = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                terms += [(J_h / 4, _word(n, {q: p, q + 1: p})) for p in "XYZ"]
            if r + 1 < rows:
                terms += [(J_v / 4, _word(n, {q: p, q + cols: p})) for p in "XYZ"]
    return PauliObservable(terms, n_qubits=n)


def _word(n: int, ops: dict) -> str:
    return "".join(ops.get(q, "I") for q in reversed(range(n)))


# ---------------------------------------------------------------------------
# model


def brick_wall_bonds(n: int) -> list[tuple[int, int]]:
    """Bonds in application order: ``(0,1), (2,3), ...`` then ``(1,2), (3,4), ...``."""
    return [(i, i + 1) for i in range(0, n - 1, 2)] + [(i, i + 1) for i in range(1, n - 1, 2)]


def n_parameters(n: int, layers: int = DEFAULT_LAYERS) -> int:
    return n + layers * (3 * n + 3 * (n - 1))


@dataclass
class VqtAnsatz:
    """Latent angles followed by ``layers`` blocks of rotations and entanglers.

    The flat parameter vector is ``theta`` (one per qubit) and then, per layer,
    three ``Rxyz`` angles per site followed by three ``Rxxyyzz`` angles per bond
    in :func:`brick_wall_bonds` order.
    """

    n_qubits: int
    layers: int = DEFAULT_LAYERS
    circuit: Circuit = field(init=False)

    def __post_init__(self):
        self.circuit = ansatz_circuit(self.n_qubits, self.layers)

    @property
    def n_params(self) -> int:
        return n_parameters(self.n_qubits, self.layers)

    def split(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {x.shape}")
        n = self.n_qubits
        return x[:n], {f"x{i}": float(v) for i, v in enumerate(x[n:], start=n)}

    def state(self, x: np.ndarray) -> np.ndarray:
        theta, values = self.split(x)
        return forward(self.circuit, latent_bloch(theta), values)

    def initial_params(self, rng: np.random.Generator) -> np.ndarray:
        n = self.n_qubits
        theta = rng.uniform(-np.pi, np.pi, n)
        rest = rng.uniform(-0.1, 0.1, self.n_params - n)
        return np.concatenate([theta, rest])


def ansatz_circuit(n: int, layers: int = DEFAULT_LAYERS) -> Circuit:
    """Circuit with parameters named ``x{i}`` after their flat index (``i >= n``)."""
    c = Circuit(n)
    k = n
    for _ in range(layers):
        for q in range(n):
            c.gate("Rxyz", [f"x{k}", f"x{k + 1}", f"x{k + 2}"], [q])
            k += 3
        for a, b in brick_wall_bonds(n):
            c.gate("Rxxyyzz", [f"x{k}", f"x{k + 1}", f"x{k + 2}"], [a, b])
            k += 3
    return c


def latent_bloch(theta: Sequence[float]) -> np.ndarray:
    """Product of per-qubit factors ``(1, 0, 0, cos theta_j)``; ``theta[0]`` is qubit 0."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size < 1:
        raise ValueError("theta must be a non-empty vector")
    return product_state([np.array([1.0, 0.0, 0.0, c]) for c in np.cos(theta)])


def _latent_grad(theta: np.ndarray, rbar: np.ndarray) -> np.ndarray:
    factors = [np.array([1.0, 0.0, 0.0, c]) for c in np.cos(theta)]
    out = np.empty(len(theta))
    for j, t in enumerate(theta):
        df = list(factors)
        df[j] = np.array([0.0, 0.0, 0.0, -np.sin(t)])
        out[j] = rbar @ product_state(df)
    return out


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -p * np.log(p) - (1 - p) * np.log(1 - p)
    # 0 log 0 = 0 at the pure endpoints.
    return np.nan_to_num(np.where((p <= 0) | (p >= 1), 0.0, terms))


def latent_entropy(theta: np.ndarray) -> float:
    return float(np.sum(_binary_entropy((1 + np.cos(theta)) / 2)))


def latent_entropy_grad(theta: np.ndarray) -> np.ndarray:
    """``dS/dtheta_j = -sin(theta_j) log|tan(theta_j / 2)|``, zero at the pure endpoints."""
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = -s * np.log(np.abs(np.tan(theta / 2)))
    return np.where(np.isfinite(g), g, 0.0)


# ---------------------------------------------------------------------------
# target and metrics


@dataclass
class ThermalTarget:
    hamiltonian: PauliObservable
    beta: float
    state: np.ndarray
    log_partition: float
    density: np.ndarray = field(repr=False)


def thermal_target(H: PauliObservable, beta: float) -> ThermalTarget:
    """Gibbs state from the dense eigendecomposition, shifted by the ground energy."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    evals, evecs = np.linalg.eigh(H.to_matrix())
    shifted = -beta * (evals - evals[0])
    weights = np.exp(shifted)
    z = weights.sum()
    rho = (evecs * (weights / z)) @ evecs.conj().T
    rho = (rho + rho.conj().T) / 2
    log_z = float(-beta * evals[0] + math.log(z))
    return ThermalTarget(H, float(beta), bloch_from_density(rho), log_z, rho)


def _psd_parts(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    if vals[0] < -PSD_TOL:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {vals[0]:.3e})")
    return np.clip(vals, 0.0, None), vecs


def fidelity(r1: np.ndarray, r2: np.ndarray) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho, sigma = density_from_bloch(r1), density_from_bloch(r2)
    vals, vecs = _psd_parts(rho)
    sq = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = np.linalg.eigvalsh((sq @ sigma @ sq + (sq @ sigma @ sq).conj().T) / 2)
    return float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)


def trace_distance(r1: np.ndarray, r2: np.ndarray) -> float:
    """``Tr|rho - sigma| / 2``."""
    diff = density_from_bloch(np.asarray(r1) - np.asarray(r2))
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


# ---------------------------------------------------------------------------
# loss and optimisation


def vqt_loss(ansatz: VqtAnsatz, x: np.ndarray, target: ThermalTarget) -> tuple[float, np.ndarray]:
    """Loss ``-S + beta <H>`` and its gradient with respect to the flat parameters."""
    theta, values = ansatz.split(x)
    r_in = latent_bloch(theta)
    r_out, cache = forward(ansatz.circuit, r_in, values, return_cache=True)
    cot = cost_expectation_cotangent(target.hamiltonian)
    energy = float(cot @ r_out)
    loss = -latent_entropy(theta) + target.beta * energy
    grad = np.empty(ansatz.n_params)
    if target.beta == 0:
        grad[:] = 0.0
    else:
        report = backward(ansatz.circuit, r_out, target.beta * cot, cache, params=values)
        grad[len(theta):] = [report.params[f"x{i}"] for i in range(len(theta), ansatz.n_params)]
        grad[: len(theta)] = _latent_grad(theta, report.rbar_in)
    grad[: len(theta)] -= latent_entropy_grad(theta)
    return loss, grad


@dataclass
class AdamaxResult:
    params: np.ndarray
    losses: np.ndarray
    history: list = field(default_factory=list)


def adamax_optimize(
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    lr: float = 0.005,
    iters: int = 500,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    callback: Callable[[int, np.ndarray], object] | None = None,
) -> AdamaxResult:
    """AdaMax with bias-corrected first moment and infinity-norm second moment.

    ``losses[i]`` is the loss at the parameters before update ``i``;
    ``callback(i, x)`` results after each update are collected in ``history``.
    """
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    u = np.zeros_like(x)
    losses = np.empty(iters)
    history = []
    for t in range(1, iters + 1):
        loss, g = loss_fn(x)
        if not np.isfinite(loss) or not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite loss or gradient at iteration {t} (loss={loss})")
        losses[t - 1] = loss
        m = beta1 * m + (1 - beta1) * g
        u = np.maximum(beta2 * u, np.abs(g))
        x = x - lr / (1 - beta1**t) * m / (u + eps)
        if callback is not None:
            history.append(callback(t, x))
    return AdamaxResult(x, losses, history)


@dataclass
class VqtMetrics:
    beta: float
    seed: int
    losses: np.ndarray
    fidelity: float
    trace_distance: float
    final_loss: float
    fidelities: np.ndarray | None = None
    trace_distances: np.ndarray | None = None
    params: np.ndarray | None = None


def run_vqt(
    H: PauliObservable,
    beta: float,
    seed: int,
    layers: int = DEFAULT_LAYERS,
    lr: float = 0.005,
    iters: int = 500,
    track_metrics: bool = False,
) -> VqtMetrics:
    """One optimisation from random initial parameters drawn with ``seed``."""
    ansatz = VqtAnsatz(H.n_qubits, layers)
    target = thermal_target(H, beta)
    rng = np.random.default_rng(seed)
    x0 = ansatz.initial_params(rng)

    def track(_, x):
        r = ansatz.state(x)
        return fidelity(r, target.state), trace_distance(r, target.state)

    res = adamax_optimize(lambda x: vqt_loss(ansatz, x, target), x0, lr=lr, iters=iters,
                          callback=track if track_metrics else None)
    r = ansatz.state(res.params)
    final_loss, _ = vqt_loss(ansatz, res.params, target)
    hist = np.array(res.history) if track_metrics else None
    return VqtMetrics(
        beta=float(beta),
        seed=int(seed),
        losses=res.losses,
        fidelity=fidelity(r, target.state),
        trace_distance=trace_distance(r, target.state),
        final_loss=final_loss,
        fidelities=None if hist is None else hist[:, 0],
        trace_distances=None if hist is None else hist[:, 1],
        params=res.params,
    )


def _run_job(job: tuple) -> VqtMetrics:
    return run_vqt(*job)


def sweep(
    H: PauliObservable,
    betas: Sequence[float],
    seeds: Sequence[int],
    layers: int = DEFAULT_LAYERS,
    lr: float = 0.005,
    iters: int = 500,
    workers: int | None = None,
    track_metrics: bool = False,
) -> list[VqtMetrics]:
    """Run every ``(beta, seed)`` pair, in parallel processes when ``workers > 1``."""
    jobs = [(H, float(b), int(s), layers, lr, iters, track_metrics) for b in betas for s in seeds]
    workers = workers or int(os.environ.get("BLOCHSIM_THREADS", "1"))
    if workers <= 1 or len(jobs) == 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))
