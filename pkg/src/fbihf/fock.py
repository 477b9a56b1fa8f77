"""Brute-force second-quantized oracle on occupation bitstrings.

Modes are the composite (k, band) index of the density-matrix layout:
mode = k_idx * 2M + band, occupation stored little-endian (bit mu of a
basis-state integer is the occupation of mode mu).  Annihilation picks up
the Jordan-Wigner parity of all higher modes.  Everything is desk scale:
the Fock dimension is capped and operators are kept sparse until a dense
eigensolve is explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import subspace_angles

from .errors import DimensionCapError
from .formfactor import FormFactorTable
from .hartree_fock import Interaction, pairwise_sum

DIM_CAP = 1 << 16
DENSE_CAP = 1 << 12


@dataclass(frozen=True)
class FockSpace:
    """Bitstring Fock space over the (k, band) modes of a table's flavor."""

    n_modes: int
    _ann: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if 2**self.n_modes > DIM_CAP:
            raise DimensionCapError(
                f"Fock dimension 2^{self.n_modes} exceeds cap 2^16")

    @property
    def dim(self) -> int:
        return 1 << self.n_modes

    def annihilation(self, mu: int) -> sp.csr_matrix:
        """f_mu with Jordan-Wigner signs over higher-index modes."""
        if not self._ann:
            self._ann.extend(self._build_ops())
        return self._ann[mu]

    def _build_ops(self):
        dim = self.dim
        states = np.arange(dim, dtype=np.int64)
        ops = []
        for mu in range(self.n_modes):
            occupied = (states >> mu) & 1 == 1
            src = states[occupied]
            dst = src ^ (1 << mu)
            higher = src >> (mu + 1)
            signs = np.where(_popcount(higher) % 2 == 0, 1.0, -1.0)
            ops.append(sp.csr_matrix((signs, (dst, src)), shape=(dim, dim)))
        return ops

    def creation(self, mu: int) -> sp.csr_matrix:
        return self.annihilation(mu).conj().T.tocsr()

    def number_operator(self) -> sp.csr_matrix:
        states = np.arange(self.dim, dtype=np.int64)
        return sp.diags(_popcount(states).astype(float)).tocsr()


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x >>= 1
    return count


def fock_space_for(table: FormFactorTable) -> FockSpace:
    return FockSpace(n_modes=table.n_blocks*table.grid.n_k)


@dataclass(frozen=True)
class ManyBodyOperator:
    """Sparse operator on a FockSpace with hermiticity bookkeeping."""

    space: FockSpace
    matrix: sp.csr_matrix

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_error(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0


def build_rho_q(space: FockSpace, table: FormFactorTable, q_idx: int,
                g_idx: int) -> ManyBodyOperator:
    """Projected density operator rho(q') for q' = q + G.

    rho(q') = sum_{k,m,n} Lambda_k(q')_{mn} (f^dag_{mk} f_{n,k+q}
    - 1/2 delta_{mn} delta_{q' in reciprocal lattice}).
    """
    grid = table.grid
    m = table.n_blocks
    lattice_transfer = q_idx == grid.index(0, 0)
    total = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    ident = sp.identity(space.dim, format="csr", dtype=complex)
    for k_idx in range(grid.n_k):
        k2, _ = grid.add(k_idx, q_idx)
        lam = table.data[k_idx, q_idx, g_idx]
        for mm in range(m):
            for nn in range(m):
                c = lam[mm, nn]
                if abs(c) < 1e-300:
                    continue
                term = space.creation(k_idx*m + mm) @ space.annihilation(k2*m + nn)
                total = total + c*term.astype(complex)
                if lattice_transfer and mm == nn:
                    total = total - 0.5*c*ident
    return ManyBodyOperator(space=space, matrix=total.tocsr())


def build_h_fbi(space: FockSpace, table: FormFactorTable,
                interaction: Interaction) -> ManyBodyOperator:
    """H = (1/(N_k |Omega|)) sum_{q'} vhat(q') rho(q') rho(q')^dag.

    Each summand is Hermitian PSD, so the assembled operator is
    frustration-free by construction regardless of the q' truncation.
    """
    terms = []
    for q_idx in range(table.grid.n_k):
        for g_idx in range(table.n_g):
            v = interaction.vhat(table.qprime_vector(q_idx, g_idx))
            rho = build_rho_q(space, table, q_idx, g_idx).matrix
            terms.append(v*(rho @ rho.conj().T))
    total = pairwise_sum(terms)
    total = total/(table.grid.n_k*table.grid.lattice.area_omega)
    return ManyBodyOperator(space=space, matrix=total.tocsr())


def slater_vector(space: FockSpace, orbitals: np.ndarray) -> np.ndarray:
    """Fock vector of the Slater determinant with orbital matrix Xi.

    orbitals: (n_modes, n_filled) with orthonormal columns; column i defines
    b^dag_i = sum_mu Xi[mu, i] f^dag_mu.  The returned vector is normalized.
    """
    xi = np.asarray(orbitals)
    gram = xi.conj().T @ xi
    if np.abs(gram - np.eye(xi.shape[1])).max() > 1e-10:
        raise ValueError("orbital columns are not orthonormal")
    vec = np.zeros(space.dim, dtype=complex)
    vec[0] = 1.0
    for i in range(xi.shape[1]):
        nxt = np.zeros_like(vec)
        for mu in range(space.n_modes):
            c = xi[mu, i]
            if abs(c) > 1e-300:
                nxt += c*(space.creation(mu) @ vec)
        vec = nxt
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ValueError("Slater determinant vanished (dependent orbitals)")
    return vec/norm


def rdm_from_state(space: FockSpace, psi: np.ndarray) -> np.ndarray:
    """One-body reduced density matrix P[mu, nu] = <psi| f^dag_nu f_mu |psi>."""
    f_psi = [space.annihilation(mu) @ psi for mu in range(space.n_modes)]
    p = np.empty((space.n_modes, space.n_modes), dtype=complex)
    for mu in range(space.n_modes):
        for nu in range(space.n_modes):
            p[mu, nu] = np.vdot(f_psi[nu], f_psi[mu])
    return p


@dataclass(frozen=True)
class GroundSpaceReport:
    eigenvalues: np.ndarray
    zero_dim: int
    zero_tol: float
    principal_angles: np.ndarray | None


def ground_space(op: ManyBodyOperator, tol: float = 1e-8,
                 hf_vectors: np.ndarray | None = None) -> GroundSpaceReport:
    """Dense eigendecomposition with zero-space extraction.

    hf_vectors (dim, n) optionally supplies constructed Hartree-Fock Slater
    vectors; the report then carries the principal angles between their span
    and the numerical zero space.
    """
    if op.space.dim > DENSE_CAP:
        raise DimensionCapError(
            f"dense ground-space solve capped at dimension {DENSE_CAP}")
    w, v = np.linalg.eigh(op.toarray())
    mask = w <= tol
    zero = v[:, mask]
    angles = None
    if hf_vectors is not None and zero.shape[1] > 0:
        angles = subspace_angles(zero, np.atleast_2d(hf_vectors))
    return GroundSpaceReport(eigenvalues=w, zero_dim=int(mask.sum()),
                             zero_tol=tol, principal_angles=angles)


def car_check(space: FockSpace) -> float:
    """Worst anticommutator deviation over all mode pairs (exact by design)."""
    worst = 0.0
    eye = sp.identity(space.dim, format="csr")
    for mu in range(space.n_modes):
        f_mu = space.annihilation(mu)
        for nu in range(space.n_modes):
            f_nu = space.annihilation(nu)
            anti = f_mu.conj().T @ f_nu + f_nu @ f_mu.conj().T
            target = eye if mu == nu else sp.csr_matrix((space.dim, space.dim))
            d = anti - target
            worst = max(worst, float(abs(d).max()) if d.nnz else 0.0)
            d2 = f_mu @ f_nu + f_nu @ f_mu
            worst = max(worst, float(abs(d2).max()) if d2.nnz else 0.0)
    return worst
