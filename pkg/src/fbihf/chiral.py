"""Chiral-limit single-particle Hamiltonian on a truncated plane-wave basis.

Basis layout: 4-component spinors ordered (A1, A2, B1, B2) where A/B is the
sublattice and 1/2 the layer.  Layer 1 plane waves carry momentum k + G + q0
and layer 2 carries k + G - q0 (the two layer Dirac lattices sit on opposite
q0 offsets; their difference is q0 modulo the reciprocal lattice, which is
what the three tunneling harmonics require).  The antiholomorphic derivative
acts as multiplication by p_x + i p_y on a plane wave of momentum p.

D_k acts on (layer1, layer2) pairs; the full Hamiltonian is
H_k = [[0, D_k^dag], [D_k, 0]] in sublattice blocks, so sublattice-A zero
modes live in ker D_k and sublattice-B zero modes in ker D_k^dag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import MoireLattice, GShells, gshells

MIN_BASIS_SIZE = 7

# Tunneling harmonic n couples layer-2 index G' to layer-1 index
# G = G' + COUPLING_SHIFTS[n] with amplitude alpha * omega**n.
COUPLING_SHIFTS = ((1, 1), (0, 1), (1, 0))


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Truncated plane-wave basis shared by every k.

    boundary_mask flags G vectors with at least one tunneling partner
    truncated away; matrix rows/columns touching them carry cutoff error.
    """

    lattice: MoireLattice
    shells: GShells
    spinor_dim: int = 2
    boundary_mask: np.ndarray = field(default=None, repr=False)

    @property
    def n_g(self) -> int:
        return len(self.shells)

    @property
    def dim_d(self) -> int:
        return 2*self.n_g

    @property
    def dim_h(self) -> int:
        return 4*self.n_g

    def layer_momenta(self, k) -> tuple[np.ndarray, np.ndarray]:
        q0 = self.lattice.q_vectors[0]
        base = np.asarray(k, dtype=float) + self.shells.vectors
        return base + q0, base - q0


def build_basis(lattice: MoireLattice, radius: float) -> PlaneWaveBasis:
    sh = gshells(lattice, radius)
    if len(sh) < MIN_BASIS_SIZE:
        raise ValueError(f"plane-wave cutoff too small: {len(sh)} < {MIN_BASIS_SIZE} vectors")
    mask = np.zeros(len(sh), dtype=bool)
    for i, (a, b) in enumerate(sh.coords):
        for (da, db) in COUPLING_SHIFTS:
            if sh.index_of((a + da, b + db)) is None or sh.index_of((a - da, b - db)) is None:
                mask[i] = True
                break
    return PlaneWaveBasis(lattice=lattice, shells=sh, boundary_mask=mask)


@dataclass(frozen=True)
class ChiralOperator:
    matrix: np.ndarray
    k: np.ndarray
    alpha: float
    basis: PlaneWaveBasis

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


def _coupling_entries(basis: PlaneWaveBasis):
    """Sparse pattern of the tunneling blocks, cached on the basis object."""
    cache = getattr(basis, "_coupling_cache", None)
    if cache is not None:
        return cache
    n_g = basis.n_g
    omega = basis.lattice.omega_phase
    rows, cols, vals = [], [], []
    for i, (a, b) in enumerate(basis.shells.coords):
        for n, (da, db) in enumerate(COUPLING_SHIFTS):
            j = basis.shells.index_of((a - da, b - db))
            if j is not None:
                # layer1 row i <- layer2 col j, and the transposed partner
                rows.append(i); cols.append(n_g + j); vals.append(omega**n)
                rows.append(n_g + j); cols.append(i); vals.append(omega**n)
    cache = (np.array(rows), np.array(cols), np.array(vals, dtype=complex))
    object.__setattr__(basis, "_coupling_cache", cache)
    return cache


def assemble_d(k, alpha: float, basis: PlaneWaveBasis) -> ChiralOperator:
    """Assemble D_k(alpha) on (layer1, layer2) plane-wave components."""
    k = np.asarray(k, dtype=float)
    n_g = basis.n_g
    p1, p2 = basis.layer_momenta(k)
    mat = np.zeros((2*n_g, 2*n_g), dtype=complex)
    diag = np.concatenate([p1[:, 0] + 1j*p1[:, 1], p2[:, 0] + 1j*p2[:, 1]])
    mat[np.arange(2*n_g), np.arange(2*n_g)] = diag
    rows, cols, vals = _coupling_entries(basis)
    mat[rows, cols] += alpha*vals
    return ChiralOperator(matrix=mat, k=k, alpha=float(alpha), basis=basis)


def assemble_h(k, alpha: float, basis: PlaneWaveBasis) -> np.ndarray:
    """Full chiral Hamiltonian [[0, D^dag], [D, 0]] in sublattice blocks."""
    d = assemble_d(k, alpha, basis).matrix
    n = d.shape[0]
    h = np.zeros((2*n, 2*n), dtype=complex)
    h[:n, n:] = d.conj().T
    h[n:, :n] = d
    return h


# Displayed 4x4 symmetry matrices acting on (A1, A2, B1, B2) spinors.
Q_MATRIX = np.array([[0, 0, 1, 0],
                     [0, 0, 0, 1],
                     [1, 0, 0, 0],
                     [0, 1, 0, 0]], dtype=float)
L_MATRIX = np.array([[0, 1, 0, 0],
                     [-1, 0, 0, 0],
                     [0, 0, 0, 1],
                     [0, 0, -1, 0]], dtype=float)


def symmetry_action(which: str, values: np.ndarray, inversion_index: np.ndarray) -> np.ndarray:
    """Apply Q or L to a 4-component field sampled on an inversion-closed r set.

    values: (n_pts, 4) samples u(r_i); inversion_index[i] is the sample index
    of -r_i (modulo lattice translations).  Returns M @ conj(u(-r)).
    """
    mat = {"Q": Q_MATRIX, "L": L_MATRIX}[which]
    return values[inversion_index].conj() @ mat.T


def q_fiber_action(coeffs: np.ndarray) -> np.ndarray:
    """Antiunitary Q on plane-wave coefficients at a fixed k.

    coeffs: (..., n_g, 4) with components (A1, A2, B1, B2); the action is
    sublattice swap composed with complex conjugation, which preserves the
    k fiber.
    """
    out = coeffs.conj().copy()
    return out[..., [2, 3, 0, 1]]


def q_conjugate_h(h: np.ndarray) -> np.ndarray:
    """Matrix of Q H_k Q^{-1} in the (A-block, B-block) layout."""
    n = h.shape[0]//2
    swap = np.zeros_like(h, dtype=float)
    swap[:n, n:] = np.eye(n)
    swap[n:, :n] = np.eye(n)
    return swap @ h.conj() @ swap
