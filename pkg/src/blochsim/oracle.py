"""Dense-matrix reference implementations.

Everything here works on complex ``2**n x 2**n`` matrices and deliberately
shares no code with the Bloch kernels, so the two can be tested against each
other.  Local operators act on a list of ``targets``; ``targets[i]`` is local
bit ``i`` (the least significant local bit comes first), matching the Bloch
side's convention for multi-qubit superoperators.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI_BY_CHAR = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}


def pauli_dense(word: str) -> np.ndarray:
    """Dense Pauli string; leftmost character acts on the highest qubit."""
    mat = np.ones((1, 1), dtype=complex)
    for char in word:
        mat = np.kron(mat, _PAULI_BY_CHAR[char])
    return mat


def bloch_bruteforce(rho: np.ndarray) -> np.ndarray:
    """Project ``rho`` onto every Pauli string by an explicit loop."""
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    out = np.empty(4**n)
    for index in range(4**n):
        word = "".join("IXYZ"[(index >> (2 * q)) & 3] for q in reversed(range(n)))
        out[index] = np.trace(pauli_dense(word) @ rho).real
    return out


def density_bruteforce(r: np.ndarray) -> np.ndarray:
    n = (len(r).bit_length() - 1) // 2
    rho = np.zeros((2**n, 2**n), dtype=complex)
    for index, coeff in enumerate(r):
        if coeff != 0:
            word = "".join("IXYZ"[(index >> (2 * q)) & 3] for q in reversed(range(n)))
            rho += coeff * pauli_dense(word)
    return rho / 2**n


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full ``2**n`` matrix of a local operator acting on ``targets``."""
    targets = list(targets)
    m = len(targets)
    dim = 2**n
    idx = np.arange(dim)
    local = np.zeros(dim, dtype=np.int64)
    for i, q in enumerate(targets):
        local |= ((idx >> q) & 1) << i
    mask = sum(1 << q for q in targets)
    rest = idx & ~mask
    full = op[local[:, None], local[None, :]]
    return np.where(rest[:, None] == rest[None, :], full, 0).astype(complex)


def _apply_left(t: np.ndarray, op: np.ndarray, axes: list[int]) -> np.ndarray:
    m = len(axes)
    opt = op.reshape((2,) * (2 * m))
    out = np.tensordot(opt, t, axes=(list(range(m, 2 * m)), axes))
    return np.moveaxis(out, list(range(m)), axes)


def conjugate(rho: np.ndarray, op: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """``op rho op^dagger`` with ``op`` acting on ``targets``, via tensor contraction."""
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    targets = list(targets)
    row_axes = [n - 1 - q for q in reversed(targets)]
    col_axes = [2 * n - 1 - q for q in reversed(targets)]
    t = rho.reshape((2,) * (2 * n))
    t = _apply_left(t, op, row_axes)
    t = _apply_left(t, np.conj(op), col_axes)
    return t.reshape(dim, dim)


def kraus_apply(rho: np.ndarray, operators: Sequence[np.ndarray], targets: Sequence[int]) -> np.ndarray:
    """Kraus sum ``sum_k E_k rho E_k^dagger``."""
    out = np.zeros_like(np.asarray(rho, dtype=complex))
    for op in operators:
        out += conjugate(rho, op, targets)
    return out


def controlled_matrix(k: int, op: np.ndarray) -> np.ndarray:
    """``I + (|1><1|)^{(x)k} (x) (U - I)``; the controls are the high bits."""
    if k < 1:
        raise ValueError("need at least one control")
    proj = np.zeros((2**k, 2**k), dtype=complex)
    proj[-1, -1] = 1.0
    dim_t = op.shape[0]
    return np.eye(2**k * dim_t, dtype=complex) + np.kron(proj, op - np.eye(dim_t))


def lindblad_rhs(rho: np.ndarray, hamiltonian: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    """GKSL right-hand side for full-register ``H`` and jump operators."""
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for op in jumps:
        opd = op.conj().T
        out += op @ rho @ opd - 0.5 * (opd @ op @ rho + rho @ opd @ op)
    return out


def lindblad_superop_dense(hamiltonian: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    """Generator acting on row-major ``vec(rho)``: ``vec(A rho B) = (A (x) B^T) vec(rho)``."""
    dim = hamiltonian.shape[0]
    eye = np.eye(dim)
    gen = -1j * (np.kron(hamiltonian, eye) - np.kron(eye, hamiltonian.T))
    for op in jumps:
        ldl = op.conj().T @ op
        gen += np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T))
    return gen


def evolve_dense(rho0: np.ndarray, hamiltonian: np.ndarray, jumps: Sequence[np.ndarray], t: float) -> np.ndarray:
    dim = rho0.shape[0]
    prop = expm(lindblad_superop_dense(hamiltonian, jumps) * t)
    return (prop @ rho0.reshape(-1)).reshape(dim, dim)


def expm(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series."""
    a = np.asarray(a)
    dim = a.shape[0]
    norm = np.linalg.norm(a, 1)
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = a / 2**squarings
    result = np.eye(dim, dtype=np.result_type(a, float))
    term = result.copy()
    for k in range(1, 60):
        term = term @ scaled / k
        result = result + term
        if np.linalg.norm(term, 1) <= tol * 1e-4 * max(1.0, np.linalg.norm(result, 1)):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def psd_eig(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with tiny negative eigenvalues clipped."""
    vals, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    return np.clip(vals, 0.0, None), vecs


def psd_sqrt(rho: np.ndarray) -> np.ndarray:
    vals, vecs = psd_eig(rho)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def trace_norm(a: np.ndarray) -> float:
    """Schatten-1 norm of a Hermitian matrix."""
    return float(np.sum(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2))))


def von_neumann_entropy(rho: np.ndarray) -> float:
    vals = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    vals = vals[vals > 1e-15]
    return float(-np.sum(vals * np.log(vals)))


def partial_trace_dense(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    keep = set(keep)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = letters[:n]
    cols = "".join(rows[a] if (n - 1 - a) not in keep else letters[n + a] for a in range(n))
    out_rows = "".join(rows[a] for a in range(n) if (n - 1 - a) in keep)
    out_cols = "".join(cols[a] for a in range(n) if (n - 1 - a) in keep)
    t = np.einsum(f"{rows}{cols}->{out_rows}{out_cols}", rho.reshape((2,) * (2 * n)))
    d = 2 ** len(keep)
    return t.reshape(d, d)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    dim = 2**n
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2
