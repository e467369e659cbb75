"""Bloch superoperators for gates and their matrix-free application.

A linear map ``f`` on ``m``-qubit operators becomes the real ``4**m x 4**m``
matrix ``K[j, k] = 2**-m Tr[sigma_j f(sigma_k)]``.  For a superoperator acting
on ``targets = [t_0, ..., t_{m-1}]`` the local index is ``sum_i j_i 4**i`` with
``j_i`` the Pauli index on qubit ``t_i``, so ``t_0`` is the fastest local digit.

Builtin gates are assembled from closed forms.  Every rotation has the shape
``A + cos(theta) B + sin(theta) C``, which makes the analytic parameter
derivative ``-sin(theta) B + cos(theta) C`` free.
"""

from __future__ import annotations

import functools
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bloch import PAULIS, num_qubits

UNITARY_TOL = 1e-10

# Use the sparse row loop while a superop has at most this many nonzeros per row on average.
_SPARSE_ROW_DENSITY = 2


@functools.lru_cache(maxsize=None)
def pauli_basis(m: int) -> np.ndarray:
    """All ``4**m`` Pauli strings on ``m`` qubits, stacked in flat-index order."""
    basis = np.ones((1, 1, 1), dtype=complex)
    for _ in range(m):
        # New qubit becomes the most significant digit.
        basis = np.einsum("jab,kcd->jkacbd", PAULIS, basis).reshape(
            4 * basis.shape[0], 2 * basis.shape[1], 2 * basis.shape[2]
        )
    basis.setflags(write=False)
    return basis


def _arity_from_dim(dim: int, what: str) -> int:
    m = dim.bit_length() - 1
    if m < 1 or 2**m != dim:
        raise ValueError(f"{what} dimension {dim} is not 2**m for m >= 1")
    return m


def superop_of_map(images: np.ndarray) -> np.ndarray:
    """Pauli-basis matrix from the images ``f(sigma_k)`` of every basis element."""
    m = _arity_from_dim(images.shape[-1], "operator")
    basis = pauli_basis(m)
    mat = np.einsum("jab,kba->jk", basis, images) / 2**m
    return np.ascontiguousarray(mat.real)


@dataclass(frozen=True, eq=False)
class GateSuperop:
    """Real superoperator on ``arity`` qubits.

    ``kind`` is one of ``unitary``, ``sym``, ``antisym`` or ``channel``.
    """

    matrix: np.ndarray
    kind: str = "unitary"
    arity: int = field(init=False)

    def __post_init__(self):
        mat = np.ascontiguousarray(self.matrix, dtype=float)
        dim = mat.shape[0]
        m = int(round(np.log(dim) / np.log(4))) if dim > 0 else 0
        if mat.ndim != 2 or mat.shape[1] != dim or m < 1 or 4**m != dim:
            raise ValueError(f"superop matrix must be 4**m square, got {mat.shape}")
        if self.kind not in ("unitary", "sym", "antisym", "channel"):
            raise ValueError(f"unknown superop kind {self.kind!r}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "arity", m)

    @functools.cached_property
    def nonzeros(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.matrix)
        return [(int(j), int(k), float(self.matrix[j, k])) for j, k in zip(rows, cols)]

    @functools.cached_property
    def rows(self) -> list[list[tuple[int, float]]]:
        out: list[list[tuple[int, float]]] = [[] for _ in range(self.matrix.shape[0])]
        for j, k, v in self.nonzeros:
            out[j].append((k, v))
        return out

    @functools.cached_property
    def is_sparse(self) -> bool:
        return int(np.count_nonzero(self.matrix)) <= _SPARSE_ROW_DENSITY * self.matrix.shape[0]

    def transpose(self) -> GateSuperop:
        return GateSuperop(self.matrix.T, self.kind)

    @functools.cached_property
    def T(self) -> GateSuperop:
        return self.transpose()

    @functools.cached_property
    def swapped(self) -> GateSuperop:
        """Same two-qubit map with the roles of its two qubits exchanged."""
        if self.arity != 2:
            raise ValueError("swapped is only defined for two-qubit superops")
        mat = self.matrix.reshape(4, 4, 4, 4).transpose(1, 0, 3, 2).reshape(16, 16)
        return GateSuperop(mat, self.kind)

    def is_orthogonal(self, tol: float = 1e-12) -> bool:
        eye = np.eye(self.matrix.shape[0])
        return bool(np.max(np.abs(self.matrix.T @ self.matrix - eye)) <= tol)


def _as_superop(K) -> GateSuperop:
    return K if isinstance(K, GateSuperop) else GateSuperop(np.asarray(K), "channel")


# ---------------------------------------------------------------------------
# generic constructions from complex matrices


def conjugation_superop(op: np.ndarray, kind: str = "channel") -> GateSuperop:
    """Superop of ``rho -> E rho E^dagger`` (no unitarity requirement)."""
    op = np.asarray(op, dtype=complex)
    m = _arity_from_dim(op.shape[0], "operator")
    images = op @ pauli_basis(m) @ op.conj().T
    return GateSuperop(superop_of_map(images), kind)


def superop_from_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> GateSuperop:
    """Orthogonal superop ``U[j, k] = 2**-m Tr[sigma_j U sigma_k U^dagger]``."""
    u = np.asarray(u, dtype=complex)
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > tol:
        raise ValueError(f"matrix is not unitary (max |U^H U - I| = {err:.3e})")
    return conjugation_superop(u, kind="unitary")


def superop_derivative_from_unitary(u: np.ndarray, du: np.ndarray) -> np.ndarray:
    """Derivative of the conjugation superop given ``dU``: ``2 Re 2**-m Tr[sigma_j dU sigma_k U^dagger]``."""
    m = _arity_from_dim(u.shape[0], "operator")
    images = du @ pauli_basis(m) @ u.conj().T
    images = images + images.conj().transpose(0, 2, 1)
    return superop_of_map(images)


def sym_superop(g: np.ndarray) -> GateSuperop:
    """Superop of ``S_G(rho) = (G rho + rho G^dagger) / 2``."""
    g = np.asarray(g, dtype=complex)
    m = _arity_from_dim(g.shape[0], "operator")
    basis = pauli_basis(m)
    images = (g @ basis + basis @ g.conj().T) / 2
    return GateSuperop(superop_of_map(images), "sym")


def antisym_superop(g: np.ndarray) -> GateSuperop:
    """Superop of ``A_G(rho) = i (G rho - rho G^dagger) / 2``."""
    g = np.asarray(g, dtype=complex)
    m = _arity_from_dim(g.shape[0], "operator")
    basis = pauli_basis(m)
    images = 0.5j * (g @ basis - basis @ g.conj().T)
    return GateSuperop(superop_of_map(images), "antisym")


# ---------------------------------------------------------------------------
# builtin gates


@dataclass(frozen=True)
class GateSpec:
    """A named gate with numeric parameters placed on ``targets``.

    ``matrix`` is only used by the ``unitary`` (custom) gate.
    """

    name: str
    params: tuple = ()
    targets: tuple = (0,)
    matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        gate = _lookup(self.name)
        if self.name == "unitary":
            if self.matrix is None:
                raise ValueError("custom unitary gate needs a matrix")
            m = _arity_from_dim(np.asarray(self.matrix).shape[0], "unitary")
            if len(self.targets) != m:
                raise ValueError(f"custom unitary acts on {m} qubits, got targets {self.targets}")
        elif len(self.targets) != gate.arity:
            raise ValueError(f"{self.name} acts on {gate.arity} qubit(s), got targets {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate targets {self.targets}")
        if len(self.params) != gate.n_params:
            raise ValueError(f"{self.name} takes {gate.n_params} parameter(s), got {len(self.params)}")

    @property
    def arity(self) -> int:
        return len(self.targets)

    def with_params(self, params: Sequence) -> GateSpec:
        return GateSpec(self.name, tuple(params), self.targets, self.matrix)

    def with_targets(self, targets: Sequence[int]) -> GateSpec:
        return GateSpec(self.name, self.params, tuple(targets), self.matrix)


@dataclass(frozen=True)
class _Gate:
    n_params: int
    arity: int
    superop: Callable
    unitary: Callable | None = None
    derivatives: Callable | None = None
    # Indices of parameters that carry analytic derivatives.
    differentiable: tuple = ()
    kind: str = "unitary"


def _trig_form(a: np.ndarray, b: np.ndarray, c: np.ndarray):
    def superop(theta):
        return a + np.cos(theta) * b + np.sin(theta) * c

    def derivative(theta):
        return -np.sin(theta) * b + np.cos(theta) * c

    return superop, derivative


def _ket(*pairs) -> np.ndarray:
    v = np.zeros(16)
    for j, k in pairs:
        v[4 * j + k] = 1.0
    return v


def _pair_table(proj: Sequence, rot: Sequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Two-qubit rotation tables: I - (1 - c) P + s Q with
    # P = sum |jk><jk| over ``proj`` and Q = sum sign |out><in| over ``rot``.
    p = np.zeros((16, 16))
    for j, k in proj:
        p[4 * j + k, 4 * j + k] = 1.0
    q = np.zeros((16, 16))
    for sign, out, inp in rot:
        q[4 * out[0] + out[1], 4 * inp[0] + inp[1]] += sign
    return np.eye(16) - p, p, q


_RXX = _pair_table(
    [(0, 2), (2, 0), (0, 3), (3, 0), (1, 2), (2, 1), (1, 3), (3, 1)],
    [
        (+1, (0, 3), (1, 2)), (-1, (1, 2), (0, 3)), (+1, (3, 0), (2, 1)), (-1, (2, 1), (3, 0)),
        (+1, (1, 3), (0, 2)), (-1, (0, 2), (1, 3)), (+1, (3, 1), (2, 0)), (-1, (2, 0), (3, 1)),
    ],
)
_RYY = _pair_table(
    [(0, 1), (1, 0), (0, 3), (3, 0), (1, 2), (2, 1), (2, 3), (3, 2)],
    [
        (+1, (0, 1), (2, 3)), (-1, (2, 3), (0, 1)), (+1, (1, 0), (3, 2)), (-1, (3, 2), (1, 0)),
        (+1, (1, 2), (3, 0)), (-1, (3, 0), (1, 2)), (+1, (2, 1), (0, 3)), (-1, (0, 3), (2, 1)),
    ],
)
_RZZ = _pair_table(
    [(0, 1), (1, 0), (0, 2), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)],
    [
        (+1, (0, 2), (3, 1)), (-1, (3, 1), (0, 2)), (+1, (2, 0), (1, 3)), (-1, (1, 3), (2, 0)),
        (+1, (2, 3), (1, 0)), (-1, (1, 0), (2, 3)), (+1, (3, 2), (0, 1)), (-1, (0, 1), (3, 2)),
    ],
)


def _plane_rotation(i: int, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Rotation by theta in the (i, j) plane of the Bloch components.
    b = np.zeros((4, 4))
    b[i, i] = b[j, j] = 1.0
    c = np.zeros((4, 4))
    c[i, j], c[j, i] = -1.0, 1.0
    return np.eye(4) - b, b, c


_RX = _plane_rotation(2, 3)
_RY = _plane_rotation(3, 1)
_RZ = _plane_rotation(1, 2)


def _cross(n: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])


def _rn_parts(axis: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Rodrigues: Rot = cos I + sin [n]x + (1 - cos) n n^T
    n = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError(f"rotation axis {tuple(n)} is not a unit vector")
    a = np.zeros((4, 4))
    b = np.zeros((4, 4))
    c = np.zeros((4, 4))
    a[0, 0] = 1.0
    a[1:, 1:] = np.outer(n, n)
    b[1:, 1:] = np.eye(3) - np.outer(n, n)
    c[1:, 1:] = _cross(n)
    return a, b, c


def _rn_superop(theta, nx, ny, nz):
    a, b, c = _rn_parts((nx, ny, nz))
    return a + np.cos(theta) * b + np.sin(theta) * c


def _rn_derivatives(theta, nx, ny, nz):
    _, b, c = _rn_parts((nx, ny, nz))
    return [-np.sin(theta) * b + np.cos(theta) * c, None, None, None]


def _rn_unitary(theta, nx, ny, nz):
    gen = nx * PAULIS[1] + ny * PAULIS[2] + nz * PAULIS[3]
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * gen


# exp(i (w . sigma)) rotates the Bloch vector by -2|w| about w/|w|. The helper
# functions below are smooth at w = 0; small arguments use their Taylor series.
_SERIES_CUTOFF = 0.05


def _axis_angle_coeffs(alpha: float) -> tuple[float, float, float, float]:
    a2 = alpha * alpha
    if alpha < _SERIES_CUTOFF:
        f1 = 2 - 4 * a2 / 3 + 4 * a2**2 / 15 - 8 * a2**3 / 315
        f2 = 2 - 2 * a2 / 3 + 4 * a2**2 / 45 - 2 * a2**3 / 315
        g1 = -8 / 3 + 16 * a2 / 15 - 16 * a2**2 / 105 + 32 * a2**3 / 2835
        g2 = -4 / 3 + 16 * a2 / 45 - 4 * a2**2 / 105 + 32 * a2**3 / 14175
    else:
        s2, c2 = np.sin(2 * alpha), np.cos(2 * alpha)
        f1 = s2 / alpha
        f2 = (1 - c2) / a2
        g1 = (2 * alpha * c2 - s2) / alpha**3
        g2 = (2 * alpha * s2 - 2 * (1 - c2)) / alpha**4
    return f1, f2, g1, g2


def _rxyz_superop(wx, wy, wz):
    w = np.array([wx, wy, wz], dtype=float)
    alpha = float(np.linalg.norm(w))
    f1, f2, _, _ = _axis_angle_coeffs(alpha)
    out = np.zeros((4, 4))
    out[0, 0] = 1.0
    out[1:, 1:] = np.cos(2 * alpha) * np.eye(3) - f1 * _cross(w) + f2 * np.outer(w, w)
    return out


def _rxyz_derivatives(wx, wy, wz):
    w = np.array([wx, wy, wz], dtype=float)
    alpha = float(np.linalg.norm(w))
    f1, f2, g1, g2 = _axis_angle_coeffs(alpha)
    cw, ww = _cross(w), np.outer(w, w)
    out = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        block = (
            -2 * f1 * w[i] * np.eye(3)
            - g1 * w[i] * cw
            - f1 * _cross(e)
            + g2 * w[i] * ww
            + f2 * (np.outer(e, w) + np.outer(w, e))
        )
        d = np.zeros((4, 4))
        d[1:, 1:] = block
        out.append(d)
    return out


def _rxyz_unitary(wx, wy, wz):
    return scipy.linalg.expm(1j * (wx * PAULIS[1] + wy * PAULIS[2] + wz * PAULIS[3]))


_XX = np.kron(PAULIS[1], PAULIS[1])
_YY = np.kron(PAULIS[2], PAULIS[2])
_ZZ = np.kron(PAULIS[3], PAULIS[3])

_rxx, _drxx = _trig_form(*_RXX)
_ryy, _dryy = _trig_form(*_RYY)
_rzz, _drzz = _trig_form(*_RZZ)


def _rxxyyzz_superop(a, b, c):
    # exp(i(a XX + b YY + c ZZ)) = Rxx(-2a) Ryy(-2b) Rzz(-2c); the factors commute.
    return _rxx(-2 * a) @ _ryy(-2 * b) @ _rzz(-2 * c)


def _rxxyyzz_derivatives(a, b, c):
    xx, yy, zz = _rxx(-2 * a), _ryy(-2 * b), _rzz(-2 * c)
    return [
        -2 * _drxx(-2 * a) @ yy @ zz,
        -2 * xx @ _dryy(-2 * b) @ zz,
        -2 * xx @ yy @ _drzz(-2 * c),
    ]


def _rxxyyzz_unitary(a, b, c):
    return scipy.linalg.expm(1j * (a * _XX + b * _YY + c * _ZZ))


def _fixed(mat):
    mat = np.asarray(mat, dtype=float)
    return lambda: mat


def _fixed_unitary(u):
    u = np.asarray(u, dtype=complex)
    return lambda: u


def _trig_gate(parts, arity, unitary):
    sup, der = _trig_form(*parts)
    return _Gate(1, arity, sup, unitary, lambda t: [der(t)], (0,))


def _exp_unitary(gen):
    return lambda theta: scipy.linalg.expm(-0.5j * theta * gen)


_SQ2 = 1 / np.sqrt(2)

GATES: dict[str, _Gate] = {
    "I": _Gate(0, 1, _fixed(np.eye(4)), _fixed_unitary(np.eye(2))),
    "X": _Gate(0, 1, _fixed(np.diag([1.0, 1, -1, -1])), _fixed_unitary(PAULIS[1])),
    "Y": _Gate(0, 1, _fixed(np.diag([1.0, -1, 1, -1])), _fixed_unitary(PAULIS[2])),
    "Z": _Gate(0, 1, _fixed(np.diag([1.0, -1, -1, 1])), _fixed_unitary(PAULIS[3])),
    "H": _Gate(
        0,
        1,
        _fixed([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0]]),
        _fixed_unitary(np.array([[1, 1], [1, -1]]) * _SQ2),
    ),
    "S": _Gate(
        0,
        1,
        _fixed([[1, 0, 0, 0], [0, 0, -1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
        _fixed_unitary(np.diag([1, 1j])),
    ),
    "PhaseShift": _trig_gate(_RZ, 1, lambda phi: np.diag([1, np.exp(1j * phi)])),
    "Rx": _trig_gate(_RX, 1, _exp_unitary(PAULIS[1])),
    "Ry": _trig_gate(_RY, 1, _exp_unitary(PAULIS[2])),
    "Rz": _trig_gate(_RZ, 1, _exp_unitary(PAULIS[3])),
    "Rn": _Gate(4, 1, _rn_superop, _rn_unitary, _rn_derivatives, (0,)),
    "Rxyz": _Gate(3, 1, _rxyz_superop, _rxyz_unitary, _rxyz_derivatives, (0, 1, 2)),
    "Rxx": _trig_gate(_RXX, 2, _exp_unitary(_XX)),
    "Ryy": _trig_gate(_RYY, 2, _exp_unitary(_YY)),
    "Rzz": _trig_gate(_RZZ, 2, _exp_unitary(_ZZ)),
    "Rxxyyzz": _Gate(3, 2, _rxxyyzz_superop, _rxxyyzz_unitary, _rxxyyzz_derivatives, (0, 1, 2)),
    "Proj1": _Gate(
        0,
        1,
        _fixed(0.5 * np.array([[1, 0, 0, -1], [0, 0, 0, 0], [0, 0, 0, 0], [-1, 0, 0, 1]])),
        kind="channel",
    ),
    "unitary": _Gate(0, 0, None),
}


def _lookup(name: str) -> _Gate:
    try:
        return GATES[name]
    except KeyError:
        raise ValueError(f"unknown gate {name!r}") from None


def _numeric(params) -> list[float]:
    try:
        return [float(p) for p in params]
    except (TypeError, ValueError):
        raise ValueError(f"gate parameters must be numeric, got {params!r}") from None


def builtin_superop(spec: GateSpec) -> GateSuperop:
    """Closed-form superop of a builtin gate (or the projection of a custom unitary)."""
    if spec.name == "unitary":
        return superop_from_unitary(spec.matrix)
    gate = _lookup(spec.name)
    return GateSuperop(gate.superop(*_numeric(spec.params)), gate.kind)


def gate_unitary(spec: GateSpec) -> np.ndarray:
    """Dense ``2**m`` matrix of the gate, local bit ``i`` on ``spec.targets[i]``."""
    if spec.name == "unitary":
        return np.asarray(spec.matrix, dtype=complex)
    gate = _lookup(spec.name)
    if gate.unitary is None:
        raise ValueError(f"{spec.name} has no unitary matrix")
    return np.asarray(gate.unitary(*_numeric(spec.params)), dtype=complex)


def gate_unitary_derivatives(spec: GateSpec) -> list[np.ndarray | None]:
    """``dU/dp`` for each parameter (``None`` where not differentiable).

    Rotations ``exp(-i theta G / 2)`` use ``-i G U / 2``; the remaining
    parametrized gates go through the Frechet derivative of ``expm``.
    """
    gate = _lookup(spec.name)
    params = _numeric(spec.params)
    u = gate_unitary(spec)
    exp_generators = {"Rx": PAULIS[1], "Ry": PAULIS[2], "Rz": PAULIS[3], "Rxx": _XX, "Ryy": _YY, "Rzz": _ZZ}
    if spec.name in exp_generators:
        return [-0.5j * exp_generators[spec.name] @ u]
    if spec.name == "PhaseShift":
        return [np.diag([0, 1j * np.exp(1j * params[0])])]
    if spec.name == "Rn":
        gen = params[1] * PAULIS[1] + params[2] * PAULIS[2] + params[3] * PAULIS[3]
        return [-0.5j * gen @ u, None, None, None]
    if spec.name == "Rxyz":
        a = 1j * (params[0] * PAULIS[1] + params[1] * PAULIS[2] + params[2] * PAULIS[3])
        return [scipy.linalg.expm_frechet(a, 1j * PAULIS[i], compute_expm=False) for i in (1, 2, 3)]
    if spec.name == "Rxxyyzz":
        # The three generators commute, so each derivative is a plain left factor.
        return [1j * g @ u for g in (_XX, _YY, _ZZ)]
    return [None] * gate.n_params


def builtin_derivatives(spec: GateSpec) -> list[np.ndarray | None]:
    """Analytic ``dK/dp`` of the closed-form superop for each parameter."""
    gate = _lookup(spec.name)
    if gate.derivatives is None:
        return [None] * gate.n_params
    return list(gate.derivatives(*_numeric(spec.params)))


def differentiable_params(spec: GateSpec) -> tuple:
    return _lookup(spec.name).differentiable


# Closed forms for the symmetric / antisymmetric sandwich of single-qubit gates.


def _sym_antisym_closed(name: str, params: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    s = np.zeros((4, 4))
    a = np.zeros((4, 4))
    if name == "I":
        s = np.eye(4)
    elif name == "X":
        s[0, 1] = s[1, 0] = 1
        a[2, 3], a[3, 2] = 1, -1
    elif name == "Y":
        s[0, 2] = s[2, 0] = 1
        a[1, 3], a[3, 1] = -1, 1
    elif name == "Z":
        s[0, 3] = s[3, 0] = 1
        a[1, 2], a[2, 1] = 1, -1
    elif name == "H":
        s[0, 1] = s[0, 3] = s[1, 0] = s[3, 0] = _SQ2
        a[1, 2], a[2, 1], a[2, 3], a[3, 2] = _SQ2, -_SQ2, _SQ2, -_SQ2
    elif name == "S":
        s = 0.5 * np.array([[1, 0, 0, 1], [0, 1, -1, 0], [0, 1, 1, 0], [1, 0, 0, 1]])
        a = 0.5 * np.array([[-1, 0, 0, 1], [0, -1, 1, 0], [0, -1, -1, 0], [1, 0, 0, -1]])
    elif name == "PhaseShift":
        c, sn = np.cos(params[0] / 2), np.sin(params[0] / 2)
        s = np.array([[c * c, 0, 0, sn * sn], [0, c * c, -c * sn, 0], [0, c * sn, c * c, 0], [sn * sn, 0, 0, c * c]])
        a = np.array(
            [[-c * sn, 0, 0, c * sn], [0, -c * sn, sn * sn, 0], [0, -sn * sn, -c * sn, 0], [c * sn, 0, 0, -c * sn]]
        )
    elif name in ("Rx", "Ry", "Rz", "Rn"):
        axis = {"Rx": (1, 0, 0), "Ry": (0, 1, 0), "Rz": (0, 0, 1)}.get(name, params[1:4])
        n1, n2, n3 = axis
        c, sn = np.cos(params[0] / 2), np.sin(params[0] / 2)
        s = np.array(
            [
                [c, 0, 0, 0],
                [0, c, -sn * n3, sn * n2],
                [0, sn * n3, c, -sn * n1],
                [0, -sn * n2, sn * n1, c],
            ]
        )
        a[0, 1:] = a[1:, 0] = sn * np.asarray(axis, dtype=float)
    elif name == "Proj1":
        s = 0.5 * np.array([[1, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0], [-1, 0, 0, 1]])
        a[1, 2], a[2, 1] = -0.5, 0.5
    else:
        raise ValueError(f"no closed-form sym/antisym superop for {name!r}")
    return s, a


def builtin_sym_superop(spec: GateSpec) -> GateSuperop:
    s, _ = _sym_antisym_closed(spec.name, _numeric(spec.params))
    return GateSuperop(s, "sym")


def builtin_antisym_superop(spec: GateSpec) -> GateSuperop:
    _, a = _sym_antisym_closed(spec.name, _numeric(spec.params))
    return GateSuperop(a, "antisym")


def has_closed_sym_antisym(name: str) -> bool:
    return name in ("I", "X", "Y", "Z", "H", "S", "PhaseShift", "Rx", "Ry", "Rz", "Rn", "Proj1")


# ---------------------------------------------------------------------------
# application


def _check_qubits(targets: Sequence[int], n: int) -> None:
    for q in targets:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n} qubits")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate qubit indices {tuple(targets)}")


def _sparse_rows(x: np.ndarray, out: np.ndarray, rows, slicer) -> None:
    for j, terms in enumerate(rows):
        dst = out[slicer(j)]
        if not terms:
            dst[...] = 0.0
            continue
        k, v = terms[0]
        if v == 1.0:
            np.copyto(dst, x[slicer(k)])
        elif v == -1.0:
            np.negative(x[slicer(k)], out=dst)
        else:
            np.multiply(x[slicer(k)], v, out=dst)
        for k, v in terms[1:]:
            if v == 1.0:
                dst += x[slicer(k)]
            elif v == -1.0:
                dst -= x[slicer(k)]
            else:
                dst += v * x[slicer(k)]


def _finish(r: np.ndarray, out: np.ndarray, inplace: bool) -> np.ndarray:
    if inplace:
        r[...] = out.reshape(r.shape)
        return r
    return out.reshape(r.shape)


def apply_1q(r: np.ndarray, K, qubit: int, inplace: bool = False) -> np.ndarray:
    """Apply a single-qubit superop to qubit ``qubit``.

    ``r`` may carry leading batch axes; the Bloch index is the last axis.
    """
    K = _as_superop(K)
    if K.arity != 1:
        raise ValueError(f"apply_1q needs a one-qubit superop, got arity {K.arity}")
    n = num_qubits(r)
    _check_qubits([qubit], n)
    x = np.asarray(r, dtype=float).reshape(-1, 4 ** (n - 1 - qubit), 4, 4**qubit)
    if K.is_sparse:
        out = np.empty_like(x)
        _sparse_rows(x, out, K.rows, lambda j: (slice(None), slice(None), j))
    else:
        out = np.einsum("jk,bakc->bajc", K.matrix, x)
    return _finish(r, out, inplace)


def apply_2q(r: np.ndarray, K, qubit_a: int, qubit_b: int, inplace: bool = False) -> np.ndarray:
    """Apply a two-qubit superop; ``qubit_a`` is the fast local digit of ``K``."""
    K = _as_superop(K)
    if K.arity != 2:
        raise ValueError(f"apply_2q needs a two-qubit superop, got arity {K.arity}")
    n = num_qubits(r)
    _check_qubits([qubit_a, qubit_b], n)
    if qubit_a > qubit_b:
        K = K.swapped
        qubit_a, qubit_b = qubit_b, qubit_a
    shape = (-1, 4 ** (n - 1 - qubit_b), 4, 4 ** (qubit_b - qubit_a - 1), 4, 4**qubit_a)
    x = np.asarray(r, dtype=float).reshape(shape)
    if K.is_sparse:
        out = np.empty_like(x)
        full = slice(None)
        _sparse_rows(x, out, K.rows, lambda j: (full, full, j >> 2, full, j & 3, full))
    else:
        out = np.einsum("stuv,bpuxvz->bpsxtz", K.matrix.reshape(4, 4, 4, 4), x)
    return _finish(r, out, inplace)


def apply_mq(r: np.ndarray, K, targets: Sequence[int], inplace: bool = False) -> np.ndarray:
    """Apply an ``m``-qubit superop by a strided tensor contraction."""
    K = _as_superop(K)
    targets = [int(t) for t in targets]
    if K.arity != len(targets):
        raise ValueError(f"superop of arity {K.arity} given {len(targets)} targets")
    n = num_qubits(r)
    _check_qubits(targets, n)
    m = K.arity
    x = np.asarray(r, dtype=float).reshape((-1,) + (4,) * n)
    in_axes = [n - q for q in reversed(targets)]
    kt = K.matrix.reshape((4,) * (2 * m))
    out = np.tensordot(kt, x, axes=(list(range(m, 2 * m)), in_axes))
    out = np.moveaxis(out, list(range(m)), in_axes)
    return _finish(r, np.ascontiguousarray(out), inplace)


def apply(r: np.ndarray, K, targets: Sequence[int], inplace: bool = False) -> np.ndarray:
    """Dispatch to the one-, two- or general-arity kernel."""
    targets = list(targets)
    if len(targets) == 1:
        return apply_1q(r, K, targets[0], inplace)
    if len(targets) == 2:
        return apply_2q(r, K, targets[0], targets[1], inplace)
    return apply_mq(r, K, targets, inplace)


def apply_gate(r: np.ndarray, spec: GateSpec, inplace: bool = False) -> np.ndarray:
    return apply(r, builtin_superop(spec), spec.targets, inplace)


def lift_superop(K, targets: Sequence[int], n: int) -> np.ndarray:
    """Dense ``4**n`` matrix of a local superop embedded into ``n`` qubits."""
    eye = np.eye(4**n)
    return apply(eye, K, targets).T.copy()
