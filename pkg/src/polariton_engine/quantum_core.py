"""Dense operators and states on truncated qubit(s) x Fock spaces.

Basis ordering is fixed for the whole package: qubit indices vary slowest,
the Fock index fastest. Each qubit uses ``|e> = 0`` and ``|g> = 1`` so that
``sigma_z = diag(+1, -1)``. For one qubit, ``|q, n>`` sits at index
``q * (N_max + 1) + n``; for two qubits ``|q1 q2, n>`` sits at
``(2 * q1 + q2) * (N_max + 1) + n``.

Operators and states are plain complex ``numpy`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

HERMITIAN_TOL = 1e-12
EXCITED, GROUND = 0, 1


@dataclass(frozen=True)
class HilbertSpace:
    n_qubits: int
    fock_cutoff: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be >= 1, got {self.fock_cutoff}")

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def qubit_dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.n_fock

    def index(self, qubits, n: int) -> int:
        """Flat index of ``|qubits, n>``; ``qubits`` is a string like ``"eg"`` or a tuple of 0/1."""
        if isinstance(qubits, str):
            qubits = tuple(EXCITED if c == "e" else GROUND for c in qubits)
        if len(qubits) != self.n_qubits:
            raise ValueError(f"expected {self.n_qubits} qubit labels, got {len(qubits)}")
        if not 0 <= n <= self.fock_cutoff:
            raise ValueError(f"Fock index {n} outside 0..{self.fock_cutoff}")
        q = 0
        for bit in qubits:
            q = 2 * q + bit
        return q * self.n_fock + n

    def basis(self, qubits, n: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(qubits, n)] = 1.0
        return v

    def lift_field(self, op: np.ndarray) -> np.ndarray:
        return np.kron(np.eye(self.qubit_dim), op)

    def lift_qubits(self, op: np.ndarray) -> np.ndarray:
        return np.kron(op, np.eye(self.n_fock))

    def a(self) -> np.ndarray:
        return self.lift_field(annihilation_op(self.fock_cutoff))

    def number(self) -> np.ndarray:
        a = self.a()
        return a.conj().T @ a

    def sigma(self, which: int = 1):
        """(sigma_z, sigma_+, sigma_-) of qubit ``which`` (1-based) on the full space."""
        return tuple(self.lift_qubits(op) for op in qubit_ops(self.n_qubits, which))

    def collective(self):
        """Collective (S_z, S_+, S_-) summed over all qubits, on the full space."""
        ops = [self.sigma(k) for k in range(1, self.n_qubits + 1)]
        return tuple(sum(group) for group in zip(*ops))

    def excitation_number(self) -> np.ndarray:
        sz, _, _ = self.collective()
        return (sz + self.n_qubits * np.eye(self.dim)) / 2 + self.number()


def annihilation_op(n_max: int) -> np.ndarray:
    if n_max < 1:
        raise ValueError(f"Fock cutoff must be >= 1, got {n_max}")
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


def qubit_ops(n_qubits: int, which: int):
    """Pauli z, raising and lowering operators on qubit ``which`` of an n-qubit register.

    Returned on the 2**n_qubits register only; use ``HilbertSpace.lift_qubits``
    to act on the full space.
    """
    if not 1 <= which <= n_qubits:
        raise IndexError(f"qubit index {which} outside 1..{n_qubits}")
    sz = np.diag([1.0, -1.0]).astype(complex)
    sp = np.array([[0, 1], [0, 0]], dtype=complex)  # |g> -> |e>
    eye = np.eye(2, dtype=complex)

    def embed(op):
        factors = [op if k == which else eye for k in range(1, n_qubits + 1)]
        return reduce(np.kron, factors)

    return embed(sz), embed(sp), embed(sp.T.copy())


def tensor(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def is_hermitian(A: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(A - A.conj().T), initial=0.0) <= tol * max(1.0, np.max(np.abs(A), initial=0.0)))


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real and positive."""
    vectors = np.array(vectors, dtype=complex)
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    return vectors * (np.abs(pivots) / pivots)


def eig_hermitian(A: np.ndarray):
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors (columns)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not is_hermitian(A):
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    values, vectors = np.linalg.eigh(A)
    return values, fix_phase(vectors)


def _check_dims(A: np.ndarray, state: np.ndarray):
    if state.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: operator {A.shape[0]}, state {state.shape[0]}")


def expectation(A: np.ndarray, state: np.ndarray) -> complex:
    """<psi|A|psi> for a vector, Tr[rho A] for a density matrix."""
    state = np.asarray(state)
    _check_dims(A, state)
    if state.ndim == 1:
        return complex(np.vdot(state, A @ state))
    return complex(np.trace(state @ A))


def populations(state: np.ndarray, projectors) -> np.ndarray:
    state = np.asarray(state)
    P = np.atleast_2d(np.asarray(projectors))
    if P.shape[1] != state.shape[0]:
        raise ValueError(f"dimension mismatch: projector {P.shape[1]}, state {state.shape[0]}")
    if state.ndim == 1:
        return np.abs(P.conj() @ state) ** 2
    return np.real(np.einsum("ki,ij,kj->k", P.conj(), state, P))


def ket2dm(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def thermal_field_dm(space: HilbertSpace, n_bar: float, qubits=None) -> np.ndarray:
    """Product of a qubit basis state (all ground by default) and a truncated thermal field."""
    if qubits is None:
        qubits = "g" * space.n_qubits
    n = np.arange(space.n_fock)
    p = n_bar ** n / (n_bar + 1.0) ** (n + 1)
    p /= p.sum()
    q = np.zeros((space.qubit_dim, space.qubit_dim), dtype=complex)
    i = space.index(qubits, 0) // space.n_fock
    q[i, i] = 1.0
    return np.kron(q, np.diag(p).astype(complex))


def check_density_matrix(rho: np.ndarray, trace_tol=1e-8, herm_tol=1e-10, eig_tol=1e-8):
    """Raise ValueError if ``rho`` violates trace, Hermiticity or positivity tolerances."""
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr.real:.3e} deviates from 1")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lo < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
