"""Jaynes-Cummings Hamiltonians and their closed-form dressed spectra.

Units: hbar = 1 and the cavity frequency omega_L = 1. Branch 2 of the
single-qubit doublet is ``cos(theta)|e,n> - sin(theta)|g,n+1>`` and is the
lower-energy member of each excitation block; branch 1 is its partner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quantum_core import HilbertSpace, eig_hermitian

MUCH_GREATER = 10.0


@dataclass(frozen=True)
class JCParams:
    omega: float
    g: float
    omega_L: float = 1.0
    n_qubits: int = 1

    def __post_init__(self):
        # g = 0 is the uncoupled limit used by bath-only checks; dressed states need g > 0.
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")

    @property
    def delta(self) -> float:
        return self.omega - self.omega_L

    def with_omega(self, omega: float) -> "JCParams":
        return JCParams(omega=omega, g=self.g, omega_L=self.omega_L, n_qubits=self.n_qubits)


def regime_warnings(p: JCParams) -> list[str]:
    """Violations of omega, omega_L >> |Delta| >> g (factor MUCH_GREATER)."""
    out = []
    d = abs(p.delta)
    if min(p.omega, p.omega_L) < MUCH_GREATER * d:
        out.append(f"|Delta|={d:.4g} is not << omega, omega_L (RWA / two-level validity)")
    if d < MUCH_GREATER * p.g:
        out.append(f"|Delta|={d:.4g} is not >> g={p.g:.4g} (incomplete polariton conversion)")
    return out


@dataclass(frozen=True)
class DressedLevel:
    branch: int
    n: int
    energy: float
    cos_theta: float
    sin_theta: float
    state: np.ndarray = field(repr=False, compare=False)


def rabi_frequency(delta: float, g: float, n: int) -> float:
    if n < 0:
        raise ValueError(f"excitation index must be >= 0, got {n}")
    return float(np.sqrt(delta ** 2 + 4.0 * g ** 2 * (n + 1)))


def mixing_amplitudes(delta: float, g: float, n: int) -> tuple[float, float]:
    if g <= 0:
        raise ValueError(f"mixing angle needs g > 0, got {g}")
    omega_n = rabi_frequency(delta, g, n)
    coupling = 2.0 * g * np.sqrt(n + 1)
    if delta <= 0:
        num = omega_n - delta
    else:
        # Omega_n - Delta cancels for Delta >> g; use the equivalent product form.
        num = coupling ** 2 / (omega_n + delta)
    norm = np.hypot(num, coupling)
    return float(num / norm), float(coupling / norm)


def dressed_energies(p: JCParams, n: int) -> tuple[float, float]:
    """(E_{1,n}, E_{2,n})."""
    omega_n = rabi_frequency(p.delta, p.g, n)
    e2 = p.omega + n * p.omega_L - 0.5 * (omega_n + p.delta)
    e1 = (n + 1) * p.omega_L + 0.5 * (omega_n + p.delta)
    return e1, e2


def dressed_levels(p: JCParams, n: int, space: HilbertSpace | None = None):
    """The n-th single-qubit doublet as (branch 1, branch 2) DressedLevels."""
    if p.n_qubits != 1:
        raise ValueError("dressed_levels is defined for a single qubit")
    if n < 0:
        raise ValueError(f"excitation index must be >= 0, got {n}")
    if space is None:
        space = HilbertSpace(1, n + 1)
    if n > space.fock_cutoff - 1:
        raise ValueError(f"n={n} needs Fock cutoff >= {n + 1}, space has {space.fock_cutoff}")
    c, s = mixing_amplitudes(p.delta, p.g, n)
    e1, e2 = dressed_energies(p, n)
    en, gn1 = space.basis("e", n), space.basis("g", n + 1)
    level1 = DressedLevel(1, n, e1, c, s, s * en + c * gn1)
    level2 = DressedLevel(2, n, e2, c, s, c * en - s * gn1)
    return level1, level2


def jc_hamiltonian(p: JCParams, space: HilbertSpace) -> np.ndarray:
    """H = omega/2 (S_z + N) + omega_L a^dag a + g (a S_+ + h.c.)."""
    H0, Pe = hamiltonian_parts(p, space)
    return H0 + p.omega * Pe


def hamiltonian_parts(p: JCParams, space: HilbertSpace):
    """Split H(omega) = H0 + omega * Pe; Pe = (S_z + N)/2 counts qubit excitations."""
    if p.n_qubits != space.n_qubits:
        raise ValueError(f"params have {p.n_qubits} qubits, space has {space.n_qubits}")
    sz, sp, sm = space.collective()
    a = space.a()
    Pe = (sz + space.n_qubits * np.eye(space.dim)) / 2
    H0 = p.omega_L * (a.conj().T @ a) + p.g * (a @ sp + a.conj().T @ sm)
    return H0, Pe


def block_indices(space: HilbertSpace, n_exc: int) -> np.ndarray:
    """Basis indices of the sector with ``n_exc`` total excitations."""
    N = np.real(np.diag(space.excitation_number()))
    return np.flatnonzero(np.isclose(N, n_exc))


def numeric_block_spectrum(p: JCParams, space: HilbertSpace, n_exc: int):
    """Brute-force eigenpairs of one excitation block, embedded back in the full space."""
    idx = block_indices(space, n_exc)
    H = jc_hamiltonian(p, space)
    values, vecs = eig_hermitian(H[np.ix_(idx, idx)])
    full = np.zeros((space.dim, len(idx)), dtype=complex)
    full[idx, :] = vecs
    return values, full


def two_qubit_dressed(p: JCParams, space: HilbertSpace | None = None):
    """(|phi+>, |phi->, E+, E-) of the one-excitation two-qubit block."""
    if p.n_qubits != 2:
        raise ValueError(f"two_qubit_dressed needs n_qubits=2, got {p.n_qubits}")
    if space is None:
        space = HilbertSpace(2, 1)
    omega_1 = np.sqrt(p.delta ** 2 + 8.0 * p.g ** 2)
    cos_half = np.sqrt((omega_1 + p.delta) / (2.0 * omega_1))
    sin_half = np.sqrt((omega_1 - p.delta) / (2.0 * omega_1))
    photon = space.basis("gg", 1)
    symmetric = (space.basis("ge", 0) + space.basis("eg", 0)) / np.sqrt(2.0)
    plus = sin_half * photon + cos_half * symmetric
    minus = cos_half * photon - sin_half * symmetric
    e_plus = 0.5 * (p.omega + p.omega_L + omega_1)
    e_minus = 0.5 * (p.omega + p.omega_L - omega_1)
    return plus, minus, float(e_plus), float(e_minus)


def avoided_crossing_gap(n_qubits: int, g: float) -> float:
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    return float(2.0 * np.sqrt(n_qubits) * g)
