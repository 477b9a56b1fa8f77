"""Vectorized translation-breaking scan via coupled Sylvester equations.

A candidate off-diagonal block X = P(k, k') must satisfy
X Lambda_{k'}(G) - Lambda_k(G) X = 0 for every reciprocal G.  Vectorizing
(column stacking) turns each equation into M(G) vec(X) = 0 with
M(G) = Lambda_{k'}(G)^T kron I - I kron Lambda_k(G); summing M(G)^dag M(G)
over the tabulated shells gives one PSD matrix whose kernel is exactly the
intersection of the per-G kernels.  Kernel dimensions count the commutant
directions (ground-state degeneracy); zero kernel with a spectral gap rules
the pair out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formfactor import FormFactorTable

KERNEL_TOL = 1e-10
GAP_FACTOR = 10.0


def build_pair_matrix(table: FormFactorTable, k_idx: int, kp_idx: int) -> np.ndarray:
    """M_{k,k'} = sum_G M(G)^dag M(G); Hermitian PSD of size (2M)^2."""
    m = table.n_blocks
    eye = np.eye(m)
    q0_idx = table.grid.index(0, 0)
    out = np.zeros((m*m, m*m), dtype=complex)
    for g_idx in range(table.n_g):
        lam_kp = table.data[kp_idx, q0_idx, g_idx]
        lam_k = table.data[k_idx, q0_idx, g_idx]
        mg = np.kron(lam_kp.T, eye) - np.kron(eye, lam_k)
        out += mg.conj().T @ mg
    return 0.5*(out + out.conj().T)


@dataclass(frozen=True)
class KernelReport:
    """Kernel data of one pair matrix.

    basis has shape (kernel_dim, 2M, 2M): each slice is a devectorized,
    orthonormal kernel matrix.  gap is the smallest non-kernel eigenvalue
    (NaN when the kernel exhausts the spectrum); ambiguous is set when the
    kernel/non-kernel separation is thinner than GAP_FACTOR.
    """

    pair: tuple[int, int]
    eigenvalues: np.ndarray
    tol: float
    kernel_dim: int
    basis: np.ndarray
    gap: float
    ambiguous: bool


def kernel_basis(matrix: np.ndarray, tol: float = KERNEL_TOL,
                 pair: tuple[int, int] = (-1, -1)) -> KernelReport:
    """Eigendecompose a PSD pair matrix and split off its numerical kernel.

    The kernel threshold is tol * max(lambda_max, 1): the unit floor keeps
    an all-but-zero matrix (equal-momentum pair at the zone origin) from
    classifying rounding noise as structure.
    """
    w, v = np.linalg.eigh(matrix)
    thresh = tol*max(float(w[-1]), 1.0)
    mask = w <= thresh
    dim = int(mask.sum())
    m = int(round(np.sqrt(matrix.shape[0])))
    basis = v[:, mask].T.reshape(dim, m, m).transpose(0, 2, 1)  # undo column stacking
    nonkernel = w[~mask]
    gap = float(nonkernel.min()) if nonkernel.size else float("nan")
    ambiguous = bool(nonkernel.size and gap < GAP_FACTOR*thresh)
    return KernelReport(pair=pair, eigenvalues=w, tol=thresh, kernel_dim=dim,
                        basis=basis, gap=gap, ambiguous=ambiguous)


def solve_pair(table: FormFactorTable, k_idx: int, kp_idx: int,
               tol: float = KERNEL_TOL) -> KernelReport:
    return kernel_basis(build_pair_matrix(table, k_idx, kp_idx), tol=tol,
                        pair=(k_idx, kp_idx))


def sylvester_residual(table: FormFactorTable, k_idx: int, kp_idx: int,
                       x: np.ndarray) -> float:
    """max_G ||X Lambda_{k'}(G) - Lambda_k(G) X||_F, the per-G check."""
    q0_idx = table.grid.index(0, 0)
    worst = 0.0
    for g_idx in range(table.n_g):
        r = x @ table.data[kp_idx, q0_idx, g_idx] - table.data[k_idx, q0_idx, g_idx] @ x
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def disjoint_spectra_check(table: FormFactorTable, k_idx: int, kp_idx: int) -> float:
    """Best eigenvalue-set separation over G.

    Returns max_G min_{i,j} |eig_i(Lambda_k(G)) - eig_j(Lambda_{k'}(G))|;
    any strictly positive value certifies P(k, k') = 0.
    """
    q0_idx = table.grid.index(0, 0)
    best = 0.0
    for g_idx in range(table.n_g):
        ek = np.linalg.eigvals(table.data[k_idx, q0_idx, g_idx])
        ep = np.linalg.eigvals(table.data[kp_idx, q0_idx, g_idx])
        sep = float(np.abs(ek[:, None] - ep[None, :]).min())
        best = max(best, sep)
    return best


@dataclass(frozen=True)
class AntipodalVerdict:
    k_idx: int
    forced_zero: bool
    witness_q_idx: int | None
    witness_report: KernelReport | None


def resolve_antipodal(table: FormFactorTable, k_idx: int,
                      tol: float = KERNEL_TOL) -> AntipodalVerdict:
    """Rule out P(k, -k) by rank propagation through a shifted pair.

    Rank is preserved under the invertible conjugations of generalized
    ferromagnetism, so a single shift q' with trivial kernel at
    (k + q', -k + q') forces P(k, -k) = 0.  Requires -k distinct from k on
    the grid (otherwise the pair is a diagonal block, not a
    translation-breaking candidate).
    """
    grid = table.grid
    mk_idx, _ = grid.neg(k_idx)
    if mk_idx == k_idx:
        raise ValueError("antipodal resolution needs -k != k modulo the lattice")
    for q_idx in range(1, grid.n_k):
        a, _ = grid.add(k_idx, q_idx)
        b, _ = grid.add(mk_idx, q_idx)
        if a == b or grid.neg(a)[0] == b:
            continue  # shifted pair is again diagonal or antipodal
        report = solve_pair(table, a, b, tol=tol)
        if report.kernel_dim == 0 and not report.ambiguous:
            return AntipodalVerdict(k_idx=k_idx, forced_zero=True,
                                    witness_q_idx=q_idx, witness_report=report)
    return AntipodalVerdict(k_idx=k_idx, forced_zero=False, witness_q_idx=None,
                            witness_report=None)


def scan_pairs(table: FormFactorTable, tol: float = KERNEL_TOL):
    """Kernel dimension for every ordered pair, plus per-pair reports.

    Returns (dims, reports): dims[k, k'] integer matrix and the list of
    KernelReports in row-major pair order.
    """
    n = table.grid.n_k
    dims = np.zeros((n, n), dtype=int)
    reports = []
    for a in range(n):
        for b in range(n):
            rep = solve_pair(table, a, b, tol=tol)
            dims[a, b] = rep.kernel_dim
            reports.append(rep)
    return dims, reports
