"""Multi-qubit Bloch vectors.

A density operator on ``n`` qubits is stored as the real coefficient vector
``r`` of length ``4**n`` in the tensor-product Pauli basis::

    rho = 2**-n * sum_J r_J sigma_J

with ``r_J = Tr[sigma_J rho]``.  The flat index of ``r_{j_{n-1},...,j_0}`` is
``sum_l j_l * 4**l``, so ``j_0`` (qubit 0) varies fastest.  Per qubit the Pauli
axis is ordered ``(I, X, Y, Z) <-> (0, 1, 2, 3)``.

Bloch vectors are plain ``float64`` numpy arrays; the qubit count is implied
by the length.  Pauli words are written with qubit ``n-1`` leftmost, so the
word ``"XI"`` puts ``X`` on qubit 1.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

PAULI_LABELS = "IXYZ"

PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

HERMITIAN_TOL = 1e-12

# Row j, column 2a+b: sigma_j[b, a]; projects a (row, col) bit pair onto Pauli j.
_TO_PAULI = np.array([PAULIS[j].T.reshape(4) for j in range(4)])
# Row 2a+b, column j: sigma_j[a, b]; expands Pauli j into a (row, col) bit pair.
_FROM_PAULI = np.array([PAULIS[j].reshape(4) for j in range(4)]).T


def num_qubits(r: np.ndarray) -> int:
    """Qubit count of a Bloch vector, validating that its length is a power of 4."""
    size = np.shape(r)[-1]
    n = int(round(np.log(size) / np.log(4))) if size > 0 else -1
    if n < 1 or 4**n != size:
        raise ValueError(f"Bloch vector length {size} is not 4**n for n >= 1")
    return n


def _num_qubits_dense(rho: np.ndarray) -> int:
    dim = rho.shape[0]
    if rho.ndim != 2 or rho.shape[1] != dim:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    n = dim.bit_length() - 1
    if n < 1 or 2**n != dim:
        raise ValueError(f"matrix dimension {dim} is not 2**n for n >= 1")
    return n


def _contract_axes(x: np.ndarray, mat: np.ndarray, n: int) -> np.ndarray:
    # Apply ``mat`` (4x4) to every qubit axis of a (4,)*n tensor.
    for axis in range(n):
        x = x.reshape(4**axis, 4, 4 ** (n - 1 - axis))
        x = np.einsum("jk,akb->ajb", mat, x)
    return x.reshape(-1)


def bloch_from_density(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Bloch vector ``r_J = Tr[sigma_J rho]`` of a Hermitian matrix."""
    rho = np.asarray(rho, dtype=complex)
    n = _num_qubits_dense(rho)
    err = np.max(np.abs(rho - rho.conj().T))
    if err > tol:
        raise ValueError(f"matrix is not Hermitian (max |M - M^H| = {err:.3e})")
    # Interleave row and column bits of each qubit: (a_{n-1}, b_{n-1}, ..., a_0, b_0).
    t = rho.reshape((2,) * (2 * n))
    order = [ax for q in range(n) for ax in (q, n + q)]
    t = t.transpose(order).reshape((4,) * n)
    return _contract_axes(t, _TO_PAULI, n).real.copy()


def density_from_bloch(r: np.ndarray) -> np.ndarray:
    """Dense density matrix ``2**-n sum_J r_J sigma_J``."""
    r = np.asarray(r, dtype=float)
    n = num_qubits(r)
    t = _contract_axes(r.astype(complex), _FROM_PAULI, n)
    t = t.reshape((2,) * (2 * n))
    # Undo the interleaving: axis 2q is a_{n-1-q}, axis 2q+1 is b_{n-1-q}.
    order = [2 * q for q in range(n)] + [2 * q + 1 for q in range(n)]
    return t.transpose(order).reshape(2**n, 2**n) / 2**n


def pauli_flat_index(word: str) -> int:
    """Flat Bloch index of a Pauli word (rightmost character is qubit 0)."""
    index = 0
    for char in word:
        j = PAULI_LABELS.find(char.upper())
        if j < 0 or len(char) != 1:
            raise ValueError(f"invalid Pauli character {char!r} in {word!r}")
        index = 4 * index + j
    return index


def pauli_word(index: int, n: int) -> str:
    """Inverse of :func:`pauli_flat_index`."""
    if not 0 <= index < 4**n:
        raise ValueError(f"index {index} out of range for {n} qubits")
    chars = []
    for _ in range(n):
        chars.append(PAULI_LABELS[index % 4])
        index //= 4
    return "".join(reversed(chars))


def pauli_string_matrix(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word, ``sigma_{j_{n-1}} (x) ... (x) sigma_{j_0}``."""
    mat = np.ones((1, 1), dtype=complex)
    for char in word:
        mat = np.kron(mat, PAULIS[pauli_flat_index(char)])
    return mat


class PauliObservable:
    """Real linear combination of Pauli strings.

    Duplicate words are merged on construction and words are upper-cased, so
    ``terms`` is canonical.
    """

    def __init__(self, terms: Iterable[tuple[float, str]], n_qubits: int | None = None):
        merged: dict[str, float] = {}
        for coeff, word in terms:
            word = word.upper()
            pauli_flat_index(word)
            merged[word] = merged.get(word, 0.0) + float(coeff)
        lengths = {len(w) for w in merged}
        if n_qubits is None:
            if len(lengths) != 1:
                raise ValueError("cannot infer qubit count from Pauli words")
            n_qubits = lengths.pop()
        elif lengths and lengths != {n_qubits}:
            raise ValueError(f"all Pauli words must have length {n_qubits}")
        self.n_qubits = n_qubits
        self.terms = [(c, w) for w, c in merged.items()]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence], n_qubits: int | None = None) -> PauliObservable:
        """Build from ``[word, coeff]`` pairs, the order used in JSON inputs."""
        return cls(((float(c), str(w)) for w, c in pairs), n_qubits=n_qubits)

    def to_pairs(self) -> list[list]:
        return [[w, c] for c, w in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*{w}" for c, w in self.terms)
        return f"PauliObservable({body or '0'}, n_qubits={self.n_qubits})"

    def __add__(self, other: PauliObservable) -> PauliObservable:
        return PauliObservable(self.terms + other.terms, n_qubits=self.n_qubits)

    def __mul__(self, scale: float) -> PauliObservable:
        return PauliObservable([(scale * c, w) for c, w in self.terms], n_qubits=self.n_qubits)

    __rmul__ = __mul__

    def indices(self) -> np.ndarray:
        return np.array([pauli_flat_index(w) for _, w in self.terms], dtype=np.int64)

    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    def to_matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        for coeff, word in self.terms:
            mat += coeff * pauli_string_matrix(word)
        return mat


def expectation(r: np.ndarray, obs: PauliObservable) -> float:
    """``Tr[M rho]``, a weighted lookup of Bloch entries."""
    n = num_qubits(r)
    if obs.n_qubits != n:
        raise ValueError(f"observable acts on {obs.n_qubits} qubits, state has {n}")
    if not obs.terms:
        return 0.0
    return float(np.dot(obs.coefficients(), np.asarray(r)[obs.indices()]))


def purity(r: np.ndarray) -> float:
    """``Tr[rho^2] = 2**-n |r|^2``."""
    r = np.asarray(r, dtype=float)
    return float(np.dot(r, r)) / 2 ** num_qubits(r)


def partial_trace(r: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced Bloch vector on the qubits in ``keep``.

    Tracing out a qubit selects its identity component. The kept qubits are
    renumbered in increasing order of their original index.
    """
    n = num_qubits(r)
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must name at least one qubit")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"qubit indices {keep} out of range for {n} qubits")
    t = np.asarray(r, dtype=float).reshape((4,) * n)
    index = tuple(slice(None) if (n - 1 - axis) in keep else 0 for axis in range(n))
    return t[index].reshape(-1).copy()


def product_state(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product of per-qubit Bloch vectors; ``factors[0]`` is qubit 0."""
    r = np.ones(1)
    for f in factors:
        r = np.kron(np.asarray(f, dtype=float), r)
    return r


_SINGLE_QUBIT_STATES = {
    "0": (1.0, 0.0, 0.0, 1.0),
    "1": (1.0, 0.0, 0.0, -1.0),
    "+": (1.0, 1.0, 0.0, 0.0),
    "-": (1.0, -1.0, 0.0, 0.0),
    "i": (1.0, 0.0, 1.0, 0.0),
    "-i": (1.0, 0.0, -1.0, 0.0),
    "m": (1.0, 0.0, 0.0, 0.0),
}


def single_qubit_state(label: str) -> np.ndarray:
    """Bloch vector of ``|0>, |1>, |+>, |->, |+i> ('i'), |-i> ('-i')`` or ``'m'`` (mixed)."""
    try:
        return np.array(_SINGLE_QUBIT_STATES[label])
    except KeyError:
        raise ValueError(f"unknown single-qubit state {label!r}") from None


def basis_state(bits: str) -> np.ndarray:
    """Computational basis state ``|bits><bits|``; the rightmost bit is qubit 0."""
    return product_state([single_qubit_state(b) for b in reversed(bits)])


def zero_state(n: int) -> np.ndarray:
    return basis_state("0" * n)


def maximally_mixed(n: int) -> np.ndarray:
    r = np.zeros(4**n)
    r[0] = 1.0
    return r
