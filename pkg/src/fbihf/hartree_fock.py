"""1-RDMs, interaction-projected Hartree-Fock energies, ground-state conditions.

Density matrices live on the composite index (k, band): the block P(k_a, k_b)
occupies rows [a*2M, (a+1)*2M) and columns [b*2M, (b+1)*2M) of one
(2M N_k) x (2M N_k) matrix.  Momentum-transfer sums run over q' = q + G with
q in the grid and G in the table shells; every q' reduction uses a fixed
pairwise tree so results are bit-stable regardless of evaluation order
elsewhere.

Two independent closed forms of the energy are implemented: the three-term
trace form (direct + constant + exchange) and the manifestly nonnegative
trace/commutator form.  They agree to rounding on projector inputs; keeping
both routes is the point, so neither implementation is expressed through
the other.  Translation-invariant states additionally dispatch to blockwise
evaluations of the same formulas (the off-diagonal blocks being exactly
zero collapses the big-matrix algebra to per-momentum blocks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlavorMismatchError, NotProjectorError
from .flavors import block_size, generators
from .formfactor import FormFactorTable
from .lattice import KGrid

PROJECTOR_TOL = 1e-8


def pairwise_sum(values):
    """Sum with a deterministic pairwise reduction tree."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


@dataclass(frozen=True)
class Interaction:
    """Radial interaction with strictly positive Fourier transform.

    yukawa:   vhat(q) = 2 pi / sqrt(|q|^2 + kappa^2)
    gaussian: vhat(q) = 2 pi sigma^2 exp(-(sigma |q|)^2 / 2)
    """

    family: str = "yukawa"
    kappa: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in ("yukawa", "gaussian"):
            raise ValueError(f"unknown interaction family {self.family!r}")
        if self.kappa <= 0 or self.sigma <= 0:
            raise ValueError("interaction parameters must be positive")

    def vhat(self, q) -> float:
        q = np.asarray(q, dtype=float)
        q2 = float(q @ q)
        if self.family == "yukawa":
            return 2*np.pi/np.sqrt(q2 + self.kappa**2)
        return 2*np.pi*self.sigma**2*np.exp(-0.5*self.sigma**2*q2)


@dataclass(frozen=True)
class MomentumShift:
    """Permutation pi_q on the (k, band) index set: |m,k><m,k+q|."""

    grid: KGrid
    q_idx: int
    matrix: np.ndarray

    def validate(self) -> None:
        m = self.matrix
        if not np.array_equal(np.sort(np.argmax(m, axis=1)), np.arange(m.shape[0])):
            raise ValueError("momentum shift is not a permutation")
        ni, nj = self.grid.ij[self.q_idx]
        inv_idx = self.grid.index(-ni, -nj)
        inv = momentum_shift_matrix(self.grid, inv_idx, m.shape[0]//self.grid.n_k)
        if not np.allclose(m @ inv.matrix, np.eye(m.shape[0])):
            raise ValueError("pi_q pi_{-q} != identity")


def momentum_shift_matrix(grid: KGrid, q_idx: int, blocks: int) -> MomentumShift:
    dim = blocks*grid.n_k
    mat = np.zeros((dim, dim))
    for k_idx in range(grid.n_k):
        k2, _ = grid.add(k_idx, q_idx)
        for m in range(blocks):
            mat[k_idx*blocks + m, k2*blocks + m] = 1.0
    return MomentumShift(grid=grid, q_idx=q_idx, matrix=mat)


@dataclass
class DensityMatrix:
    """Projector-valued 1-RDM with flavor tag and block access."""

    matrix: np.ndarray
    flavor: str
    grid: KGrid

    @property
    def blocks(self) -> int:
        return block_size(self.flavor)

    @property
    def half_filling(self) -> float:
        return self.blocks*self.grid.n_k/2

    def block(self, a: int, b: int) -> np.ndarray:
        m = self.blocks
        return self.matrix[a*m:(a + 1)*m, b*m:(b + 1)*m]

    def shifted(self) -> np.ndarray:
        """Q = P - I/2."""
        return self.matrix - 0.5*np.eye(self.matrix.shape[0])

    def validate(self, tol: float = PROJECTOR_TOL, half_filled: bool | None = None) -> None:
        p = self.matrix
        if np.abs(p - p.conj().T).max() > tol:
            raise NotProjectorError("P is not Hermitian")
        if np.abs(p @ p - p).max() > tol:
            raise NotProjectorError("P^2 != P")
        if half_filled:
            tr = float(np.trace(p).real)
            if abs(tr - self.half_filling) > 1e-9*max(1.0, self.half_filling):
                raise NotProjectorError(
                    f"Tr P = {tr} != half filling {self.half_filling}")

    def is_uniform_diagonal(self, tol: float = 1e-14) -> bool:
        """True when all off-diagonal blocks vanish and P(k,k) is constant."""
        m = self.blocks
        n = self.grid.n_k
        blocks = self.matrix.reshape(n, m, n, m)
        off = blocks.copy()
        for a in range(n):
            off[a, :, a, :] = 0.0
        if np.abs(off).max() > tol:
            return False
        diag = np.stack([blocks[a, :, a, :] for a in range(n)])
        return bool(np.abs(diag - diag[0]).max() <= tol)


def build_fm_state(table: FormFactorTable, choice: int) -> DensityMatrix:
    """Ferromagnetic Slater 1-RDM: P(k,k) = P0 for every k, zero elsewhere."""
    gens = generators(table.flavor)
    if not 0 <= choice < len(gens):
        raise ValueError(f"generator index {choice} invalid for flavor {table.flavor!r}")
    return uniform_state(table, gens[choice])


def uniform_state(table: FormFactorTable, p0: np.ndarray) -> DensityMatrix:
    """Translation-invariant 1-RDM with the same diagonal block at every k."""
    m = block_size(table.flavor)
    if p0.shape != (m, m):
        raise FlavorMismatchError(f"block shape {p0.shape} does not match flavor "
                                  f"{table.flavor!r} (expected {(m, m)})")
    mat = np.kron(np.eye(table.grid.n_k), p0).astype(complex)
    return DensityMatrix(matrix=mat, flavor=table.flavor, grid=table.grid)


def random_half_filled_projector(table: FormFactorTable, rng) -> DensityMatrix:
    """Haar-frame random rank-(M N_k) projector on the composite index."""
    dim = block_size(table.flavor)*table.grid.n_k
    x = rng.normal(size=(dim, dim//2)) + 1j*rng.normal(size=(dim, dim//2))
    q, _ = np.linalg.qr(x)
    return DensityMatrix(matrix=q @ q.conj().T, flavor=table.flavor, grid=table.grid)


class EnergyWorkspace:
    """Per-q' data shared by energy forms and residual evaluators.

    Deterministic q' order: grid index major, shell index minor.  When the
    stacked big matrices A(q') = Lambda(q') pi_q fit the memory budget they
    are precomputed once; otherwise they are assembled on the fly.
    """

    _BIG_MATRIX_BUDGET = 2.0e8  # bytes

    def __init__(self, table: FormFactorTable, interaction: Interaction):
        self.table = table
        self.interaction = interaction
        grid = table.grid
        m = table.n_blocks
        self.dim = m*grid.n_k
        self.terms = [(q_idx, g_idx) for q_idx in range(grid.n_k)
                      for g_idx in range(table.n_g)]
        self.vhat = np.array([interaction.vhat(table.qprime_vector(q, g))
                              for q, g in self.terms])
        self.perm = np.array([[grid.add(k, q_idx)[0] for k in range(grid.n_k)]
                              for q_idx in range(grid.n_k)])
        nbytes = len(self.terms)*self.dim*self.dim*16
        self.a_stack = self._assemble_stack() if nbytes <= self._BIG_MATRIX_BUDGET else None
        # constant (state-independent) energy term, paired with the q' tree
        weighted = self.vhat*np.array(
            [float(np.sum(np.abs(table.data[:, q, g])**2)) for q, g in self.terms])
        self.constant_sum = float(pairwise_sum(weighted.tolist()))

    @property
    def prefactor(self) -> float:
        return 1.0/(self.table.grid.n_k*self.table.grid.lattice.area_omega)

    def _assemble(self, q_idx: int, g_idx: int) -> np.ndarray:
        """A(q') = Lambda(q') pi_q: block row k, block column k+q."""
        m = self.table.n_blocks
        a = np.zeros((self.dim, self.dim), dtype=complex)
        blocks = self.table.data[:, q_idx, g_idx]
        for k_idx in range(self.table.grid.n_k):
            k2 = self.perm[q_idx, k_idx]
            a[k_idx*m:(k_idx + 1)*m, k2*m:(k2 + 1)*m] = blocks[k_idx]
        return a

    def _assemble_stack(self) -> np.ndarray:
        return np.stack([self._assemble(q, g) for q, g in self.terms])

    def matrices(self):
        if self.a_stack is not None:
            yield from zip(self.vhat, self.a_stack)
        else:
            for v, (q, g) in zip(self.vhat, self.terms):
                yield v, self._assemble(q, g)


def _checked(p: DensityMatrix, table: FormFactorTable) -> None:
    if p.flavor != table.flavor:
        raise FlavorMismatchError(f"state flavor {p.flavor!r} != table flavor "
                                  f"{table.flavor!r}")
    p.validate()


def _term_arrays_trace(p: DensityMatrix, ws: EnergyWorkspace):
    """Per-q' direct |Tr|^2 and exchange traces, big-matrix route."""
    q = p.shifted()
    if ws.a_stack is not None:
        aq = ws.a_stack @ q
        direct = np.abs(np.einsum("tii->t", aq))**2
        exch = np.einsum("tab,tcb,ca->t", aq, ws.a_stack.conj(), q).real
        return direct, exch
    direct = np.empty(len(ws.terms))
    exch = np.empty(len(ws.terms))
    for i, (_, a) in enumerate(ws.matrices()):
        aq = a @ q
        direct[i] = abs(np.trace(aq))**2
        exch[i] = float(np.trace(aq @ a.conj().T @ q).real)
    return direct, exch


def _term_arrays_comm(p: DensityMatrix, ws: EnergyWorkspace):
    """Per-q' |Tr(A Q)|^2 and ||[P, A]||_F^2, big-matrix route."""
    q = p.shifted()
    if ws.a_stack is not None:
        tr2 = np.abs(np.einsum("tij,ji->t", ws.a_stack, q))**2
        comm = p.matrix @ ws.a_stack - ws.a_stack @ p.matrix
        cm2 = np.sum(np.abs(comm)**2, axis=(1, 2))
        return tr2, cm2
    tr2 = np.empty(len(ws.terms))
    cm2 = np.empty(len(ws.terms))
    for i, (_, a) in enumerate(ws.matrices()):
        tr2[i] = abs(np.trace(a @ q))**2
        c = p.matrix @ a - a @ p.matrix
        cm2[i] = float(np.linalg.norm(c)**2)
    return tr2, cm2


def _uniform_term_arrays(p0: np.ndarray, table: FormFactorTable):
    """Blockwise per-q' quantities for P(k,k) = P0, off-diagonals zero.

    For such states Q(k + q', k) vanishes unless the transfer is a pure
    reciprocal vector (grid part q = 0), where it equals P0 - I/2; the
    commutator decomposes into per-momentum blocks [P0, Lambda_k(q')].
    Returns (|Tr|^2, ||comm||_F^2, exchange) arrays in workspace term order.
    """
    lam = table.data                            # (n_k, n_q, n_g, m, m)
    m = table.n_blocks
    q0 = p0 - 0.5*np.eye(m)
    n_q, n_g = lam.shape[1], lam.shape[2]
    tr = np.zeros((n_q, n_g), dtype=complex)
    origin = table.grid.index(0, 0)
    tr[origin] = np.einsum("kgmn,nm->g", lam[:, origin], q0)
    pa = np.matmul(p0, lam)
    ap = np.matmul(lam, p0)
    cm2 = np.sum(np.abs(pa - ap)**2, axis=(0, 3, 4))
    # exchange: sum_k Tr(Lambda_k(q') Q0 Lambda_k(q')^dag Q0)
    exch = np.einsum("kqgab,bc,kqgdc,da->qg", lam, q0, lam.conj(), q0).real
    return (np.abs(tr)**2).reshape(-1), cm2.reshape(-1), exch.reshape(-1)


def energy_trace_form(p: DensityMatrix, table: FormFactorTable,
                      interaction: Interaction,
                      workspace: EnergyWorkspace | None = None) -> float:
    """Three-term closed form: direct |Tr|^2 + constant - exchange trace.

    Total energy in interaction units, prefactor 1/(N_k |Omega|) included.
    """
    _checked(p, table)
    ws = workspace or EnergyWorkspace(table, interaction)
    if p.is_uniform_diagonal():
        direct, _, exch = _uniform_term_arrays(p.block(0, 0), table)
    else:
        direct, exch = _term_arrays_trace(p, ws)
    direct_sum = pairwise_sum((ws.vhat*direct).tolist())
    exch_sum = pairwise_sum((ws.vhat*exch).tolist())
    return ws.prefactor*(direct_sum + 0.25*ws.constant_sum - exch_sum)


def energy_commutator_form(p: DensityMatrix, table: FormFactorTable,
                           interaction: Interaction,
                           workspace: EnergyWorkspace | None = None) -> float:
    """Nonnegative form: sum_q' vhat (|Tr(A(P - I/2))|^2 + ||[P, A]||_F^2 / 2)."""
    _checked(p, table)
    ws = workspace or EnergyWorkspace(table, interaction)
    if p.is_uniform_diagonal():
        tr2, cm2, _ = _uniform_term_arrays(p.block(0, 0), table)
    else:
        tr2, cm2 = _term_arrays_comm(p, ws)
    total = pairwise_sum((ws.vhat*(tr2 + 0.5*cm2)).tolist())
    return ws.prefactor*total


@dataclass(frozen=True)
class ConditionResiduals:
    """Worst-case ground-state condition residuals with q'-resolved values."""

    trace_residual: float
    commutator_residual: float
    per_term_trace: np.ndarray
    per_term_commutator: np.ndarray

    def __iter__(self):
        return iter((self.trace_residual, self.commutator_residual))

    def to_record(self) -> dict:
        return {
            "trace_residual": self.trace_residual,
            "commutator_residual": self.commutator_residual,
            "argmax_trace_term": int(np.argmax(self.per_term_trace)),
            "argmax_commutator_term": int(np.argmax(self.per_term_commutator)),
        }


def gs_condition_residuals(p: DensityMatrix, table: FormFactorTable,
                           interaction: Interaction,
                           workspace: EnergyWorkspace | None = None) -> ConditionResiduals:
    """max_q' |Tr(Lambda(q') pi_q (P - I/2))| and max_q' ||[P, Lambda(q') pi_q]||_F.

    The interaction enters only through the q' enumeration; its weights do
    not rescale the residuals.
    """
    _checked(p, table)
    ws = workspace or EnergyWorkspace(table, interaction)
    if p.is_uniform_diagonal():
        tr2, cm2, _ = _uniform_term_arrays(p.block(0, 0), table)
    else:
        tr2, cm2 = _term_arrays_comm(p, ws)
    tr = np.sqrt(tr2)
    cm = np.sqrt(cm2)
    return ConditionResiduals(trace_residual=float(tr.max()),
                              commutator_residual=float(cm.max()),
                              per_term_trace=tr, per_term_commutator=cm)
