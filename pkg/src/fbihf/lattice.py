"""Moire lattice geometry, reciprocal shells, and the discrete momentum grid.

Momenta are dimensionless: the three tunneling vectors have unit length and
the reciprocal generating vectors are g1 = q1 - q0, g2 = q2 - q0.  Grid
bookkeeping is done in exact integer coordinates (fractions of g1, g2) so
that folding k + q' into the fundamental domain never accumulates float
drift; vectors are derived from the integers on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError

FOLD_TOL = 1e-9


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class MoireLattice:
    """Reciprocal/real generating vectors, unit-cell area, tunneling vectors.

    q_vectors[n] = R(2*pi*n/3) @ (0, -1); g1 = q1 - q0, g2 = q2 - q0;
    a_i . g_j = 2*pi*delta_ij; omega_phase = exp(2i*pi/3).
    """

    g1: np.ndarray
    g2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    area_omega: float
    q_vectors: np.ndarray
    omega_phase: complex
    convention: str = "standard"

    @property
    def g_matrix(self) -> np.ndarray:
        return np.column_stack([self.g1, self.g2])

    def g_vector(self, coords) -> np.ndarray:
        c = np.asarray(coords)
        return c[..., 0, None]*self.g1 + c[..., 1, None]*self.g2 if c.ndim > 1 \
            else c[0]*self.g1 + c[1]*self.g2

    def frac_coords(self, p: np.ndarray) -> np.ndarray:
        """Coordinates of p in the (g1, g2) basis."""
        return np.linalg.solve(self.g_matrix, np.asarray(p, dtype=float))


def build_lattice(convention: str = "standard") -> MoireLattice:
    """Construct the moire lattice for the fixed hexagonal convention.

    q0 = (0, -1) with 2*pi/3 rotations; any other convention id is rejected.
    """
    if convention != "standard":
        raise ValueError(f"unknown lattice convention: {convention!r}")
    q0 = np.array([0.0, -1.0])
    qs = np.array([rotation(2*np.pi*n/3) @ q0 for n in range(3)])
    g1 = qs[1] - qs[0]
    g2 = qs[2] - qs[0]
    gmat = np.column_stack([g1, g2])
    amat = 2*np.pi*np.linalg.inv(gmat).T
    area = (2*np.pi)**2/abs(np.linalg.det(gmat))
    return MoireLattice(
        g1=g1, g2=g2, a1=amat[:, 0].copy(), a2=amat[:, 1].copy(),
        area_omega=area, q_vectors=qs, omega_phase=np.exp(2j*np.pi/3),
        convention=convention,
    )


@dataclass(frozen=True)
class GShells:
    """Reciprocal vectors with |G| <= radius, sorted by (|G|, Gx, Gy).

    coords[i] are integer coordinates in the (g1, g2) basis, vectors[i] the
    Cartesian vectors.  The ordering is deterministic and the set is closed
    under negation.
    """

    coords: np.ndarray
    vectors: np.ndarray
    radius: float
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index.update({(int(a), int(b)): i for i, (a, b) in enumerate(self.coords)})

    def __len__(self) -> int:
        return len(self.coords)

    def index_of(self, coord) -> int | None:
        return self._index.get((int(coord[0]), int(coord[1])))

    def shift_map(self, shift) -> np.ndarray:
        """For each G in the list, index of G + shift, or -1 if outside."""
        da, db = int(shift[0]), int(shift[1])
        return np.array([self._index.get((int(a) + da, int(b) + db), -1)
                         for a, b in self.coords], dtype=int)


def gshells(lattice: MoireLattice, radius: float) -> GShells:
    """Enumerate all G in the reciprocal lattice with |G| <= radius."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    gnorm = np.linalg.norm(lattice.g1)
    nmax = int(np.ceil(radius/gnorm*2/np.sqrt(3))) + 2
    rows = []
    for a in range(-nmax, nmax + 1):
        for b in range(-nmax, nmax + 1):
            v = a*lattice.g1 + b*lattice.g2
            r = float(np.hypot(v[0], v[1]))
            if r <= radius + 1e-9:
                rows.append((r, round(v[0], 12), round(v[1], 12), a, b))
    rows.sort()
    coords = np.array([(a, b) for (_, _, _, a, b) in rows], dtype=int).reshape(-1, 2)
    vectors = coords @ np.array([lattice.g1, lattice.g2])
    return GShells(coords=coords, vectors=vectors, radius=float(radius))


@dataclass(frozen=True)
class KGrid:
    """Uniform n_kx x n_ky grid over the Brillouin-zone fundamental domain.

    Point (i, j) sits at (i/n_kx) g1 + (j/n_ky) g2; linear index is
    i*n_ky + j.  ``centered_offsets[x]`` holds the integer lattice translate
    that moves point x to its minimal-norm representative; eigenproblems are
    assembled there so the plane-wave cutoff ball stays centered.
    """

    lattice: MoireLattice
    n_kx: int
    n_ky: int
    ij: np.ndarray
    points: np.ndarray
    centered_offsets: np.ndarray
    centered_points: np.ndarray

    @property
    def n_k(self) -> int:
        return self.n_kx*self.n_ky

    def index(self, i: int, j: int) -> int:
        return (i % self.n_kx)*self.n_ky + (j % self.n_ky)

    def add(self, k_idx: int, q_idx: int) -> tuple[int, tuple[int, int]]:
        """Fold k + q: returns (index of representative, integer carry).

        k_point + q_point = rep_point + carry . (g1, g2) exactly.
        """
        i, j = self.ij[k_idx]
        qi, qj = self.ij[q_idx]
        i2, j2 = (i + qi) % self.n_kx, (j + qj) % self.n_ky
        carry = ((i + qi - i2)//self.n_kx, (j + qj - j2)//self.n_ky)
        return self.index(i2, j2), carry

    def neg(self, k_idx: int) -> tuple[int, tuple[int, int]]:
        """Fold -k: returns (index of representative, integer carry)."""
        i, j = self.ij[k_idx]
        i2, j2 = (-i) % self.n_kx, (-j) % self.n_ky
        carry = ((-i - i2)//self.n_kx, (-j - j2)//self.n_ky)
        return self.index(i2, j2), carry


def build_kgrid(lattice: MoireLattice, n_kx: int, n_ky: int) -> KGrid:
    if n_kx < 1 or n_ky < 1:
        raise ValueError("grid counts must be >= 1")
    ij = np.array([(i, j) for i in range(n_kx) for j in range(n_ky)], dtype=int)
    fracs = ij/np.array([n_kx, n_ky], dtype=float)
    points = fracs @ np.array([lattice.g1, lattice.g2])
    offsets = np.zeros_like(ij)
    centered = np.zeros_like(points)
    for x, (f1, f2) in enumerate(fracs):
        best = None
        for o1 in range(-2, 3):
            for o2 in range(-2, 3):
                v = (f1 + o1)*lattice.g1 + (f2 + o2)*lattice.g2
                r = np.hypot(v[0], v[1])
                if best is None or r < best[0] - 1e-12:
                    best = (r, (o1, o2), v)
        offsets[x] = best[1]
        centered[x] = best[2]
    return KGrid(lattice=lattice, n_kx=n_kx, n_ky=n_ky, ij=ij,
                 points=points, centered_offsets=offsets, centered_points=centered)


@dataclass(frozen=True)
class FoldResult:
    k_index: int
    g_coords: tuple[int, int]
    g_vector: np.ndarray


def fold_momentum(grid: KGrid, p) -> FoldResult:
    """Write p = k + G with k a grid representative and G in the reciprocal lattice.

    p must lie within FOLD_TOL of the grid modulo lattice translations,
    otherwise GridMismatchError is raised.
    """
    f = grid.lattice.frac_coords(p)
    scaled = f*np.array([grid.n_kx, grid.n_ky])
    ints = np.rint(scaled)
    if np.max(np.abs(scaled - ints)) > FOLD_TOL*max(grid.n_kx, grid.n_ky):
        raise GridMismatchError(
            f"momentum {np.asarray(p)} is off-grid: fractional residue "
            f"{np.max(np.abs(scaled - ints)):.3e}")
    i, j = int(ints[0]), int(ints[1])
    i2, j2 = i % grid.n_kx, j % grid.n_ky
    ga, gb = (i - i2)//grid.n_kx, (j - j2)//grid.n_ky
    return FoldResult(k_index=grid.index(i2, j2), g_coords=(ga, gb),
                      g_vector=ga*grid.lattice.g1 + gb*grid.lattice.g2)
