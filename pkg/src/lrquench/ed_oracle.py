"""Exact diagonalization of the spinful Hubbard ring for tiny L (ground truth).

Basis: occupation bitmasks per spin (bit i = site i), listed in increasing
integer order. Creation operators are ordered site-ascending with the whole
up-spin string before the down-spin string, so a many-body index is
up_index * dim_down + down_index and hopping signs are the parity of the
occupied sites strictly between the two ends within one spin species.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

L_MAX = 8


@dataclass(frozen=True)
class ManyBodyBasis:
    L: int
    n_up: int
    n_dn: int
    up: tuple
    dn: tuple

    @property
    def dim(self) -> int:
        return len(self.up) * len(self.dn)


def spin_states(L: int, n: int) -> tuple:
    return tuple(sorted(sum(1 << i for i in c) for c in combinations(range(L), n)))


def build_basis(L: int, n_up: int, n_dn: int) -> ManyBodyBasis:
    if L > L_MAX:
        raise ValueError(f"L={L} exceeds the ED cap {L_MAX}")
    return ManyBodyBasis(L, n_up, n_dn, spin_states(L, n_up), spin_states(L, n_dn))


def _hop_sign(state: int, i: int, j: int) -> int:
    lo, hi = min(i, j), max(i, j)
    between = state & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    return -1 if bin(between).count("1") % 2 else 1


def one_spin_operator(T: np.ndarray, states: tuple) -> np.ndarray:
    """sum_ij T_ij c+_i c_j restricted to one spin sector (complex-safe)."""
    L = T.shape[0]
    index = {s: k for k, s in enumerate(states)}
    H = np.zeros((len(states), len(states)), dtype=np.result_type(T, float))
    for k, s in enumerate(states):
        for j in range(L):
            if not (s >> j) & 1:
                continue
            for i in range(L):
                if T[i, j] == 0:
                    continue
                if i == j:
                    H[k, k] += T[i, i]
                    continue
                if (s >> i) & 1:
                    continue
                s2 = (s ^ (1 << j)) | (1 << i)
                H[index[s2], k] += T[i, j] * _hop_sign(s, i, j)
    return H


def occupations(states: tuple, L: int) -> np.ndarray:
    return np.array([[(s >> i) & 1 for i in range(L)] for s in states], dtype=float)


def double_occupancy_operator(basis: ManyBodyBasis) -> np.ndarray:
    nu = occupations(basis.up, basis.L)
    nd = occupations(basis.dn, basis.L)
    return (nu @ nd.T).ravel()  # diagonal, up-major ordering


def build_many_body_hamiltonian(single_particle, U: float, basis: ManyBodyBasis) -> np.ndarray:
    T = np.asarray(single_particle)
    if T.shape != (basis.L, basis.L):
        raise ValueError("single-particle matrix does not match the basis")
    hu = one_spin_operator(T, basis.up)
    hd = one_spin_operator(T, basis.dn)
    H = np.kron(hu, np.eye(len(basis.dn))) + np.kron(np.eye(len(basis.up)), hd)
    H = H + np.diag(U * double_occupancy_operator(basis))
    return H


def slater_amplitudes(orbitals: np.ndarray, states: tuple) -> np.ndarray:
    """<s|prod_k c+_{phi_k}|0> for each bitmask s (columns of orbitals = phi_k)."""
    L, n = orbitals.shape
    out = np.zeros(len(states), dtype=complex)
    for k, s in enumerate(states):
        sites = [i for i in range(L) if (s >> i) & 1]
        out[k] = np.linalg.det(orbitals[sites, :]) if n else 1.0
    return out


def slater_state(orb_up: np.ndarray, orb_dn: np.ndarray, basis: ManyBodyBasis) -> np.ndarray:
    psi = np.kron(slater_amplitudes(orb_up, basis.up), slater_amplitudes(orb_dn, basis.dn))
    return psi / np.linalg.norm(psi)


def _check_hermitian(H):
    if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-10:
        raise ValueError("Hamiltonian is not Hermitian")


def exact_evolve(state, H, times) -> np.ndarray:
    """Rows are e^{-i t H}|state> for each t (spectral decomposition)."""
    _check_hermitian(H)
    w, V = np.linalg.eigh(H)
    c = V.conj().T @ np.asarray(state, dtype=complex)
    phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), w))
    return (phases * c[None, :]) @ V.T


def exact_double_occupancy(states, basis: ManyBodyBasis) -> np.ndarray:
    D = double_occupancy_operator(basis)
    states = np.atleast_2d(states)
    if states.shape[1] != basis.dim:
        raise ValueError("state does not live in this basis")
    return np.real(np.sum(np.abs(states) ** 2 * D[None, :], axis=1))


def exact_fidelity(state, H0, Ha, times) -> np.ndarray:
    """|<state| e^{itH0} e^{-itHa} |state>|^2."""
    if H0.shape != Ha.shape or H0.shape[0] != np.size(state):
        raise ValueError("basis mismatch")
    a = exact_evolve(state, H0, times)
    b = exact_evolve(state, Ha, times)
    return np.abs(np.sum(a.conj() * b, axis=1)) ** 2


def half_filled_sea(orbitals: np.ndarray, energies, L: int):
    """Occupied orbital columns of the half-filled sea (stable lowest-first)."""
    order = np.argsort(np.asarray(energies, dtype=float), kind="stable")[: L // 2]
    return orbitals[:, np.sort(order)]


def quench_double_occupancy(T, orbitals, energies, U, times):
    """ED d(t) after switching on U from the half-filled sea of the given orbitals."""
    L = T.shape[0]
    basis = build_basis(L, L // 2, L // 2)
    occ = half_filled_sea(orbitals, energies, L)
    psi = slater_state(occ, occ, basis)
    H = build_many_body_hamiltonian(T, U, basis)
    return exact_double_occupancy(exact_evolve(psi, H, times), basis)


def quench_fidelity(T0, Ta, orbitals, energies, U, times):
    L = T0.shape[0]
    basis = build_basis(L, L // 2, L // 2)
    occ = half_filled_sea(orbitals, energies, L)
    psi = slater_state(occ, occ, basis)
    H0 = build_many_body_hamiltonian(T0, U, basis)
    Ha = build_many_body_hamiltonian(Ta, U, basis)
    return exact_fidelity(psi, H0, Ha, times)


def quench_kinetic_energy(T, orbitals, energies, U, times):
    """ED <H_kin>(t) after the same quench; the U = 0 Hamiltonian is the probe."""
    L = T.shape[0]
    basis = build_basis(L, L // 2, L // 2)
    occ = half_filled_sea(orbitals, energies, L)
    psi = slater_state(occ, occ, basis)
    H = build_many_body_hamiltonian(T, U, basis)
    K = build_many_body_hamiltonian(T, 0.0, basis)
    states = exact_evolve(psi, H, times)
    return np.real(np.einsum("ti,ij,tj->t", states.conj(), K, states))
