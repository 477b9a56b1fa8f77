"""Generalized ferromagnetism: moving 1-RDM blocks across momentum space by
conjugation with invertible form factors, plus the uniform-filling check.

For a ground state the commutator condition gives
P(k+q, k'+q) = Lambda_k(q+G)^{-1} P(k, k') Lambda_{k'}(q+G), so a block at
one momentum pair determines the block at every translated pair, provided
each step's form factor has full rank.  Steps follow nearest-neighbor walks
on the connectivity graph; the shift G is chosen to maximize the smallest
singular value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoInvertibleShiftError, SingularStepError
from .flatband import ConnectivityReport
from .formfactor import FormFactorTable
from .hartree_fock import DensityMatrix

INVERTIBLE_SV = 1e-6


@dataclass(frozen=True)
class ShiftChoice:
    g_coords: tuple[int, int]
    sigma_min: float
    matrix: np.ndarray


def select_invertible_shift(table: FormFactorTable, k_idx: int,
                            delta_int) -> ShiftChoice:
    """Pick the reciprocal shift maximizing sigma_min(Lambda_k(delta + G)).

    delta_int is the integer grid step to the neighbor.  Raises
    NoInvertibleShiftError when every tabulated shift is numerically
    singular, which contradicts the full-rank guarantee for neighbors with
    projector distance below 1 and indicates a grid or cutoff problem.
    """
    best = None
    for g in table.shells.coords:
        lam = table.entry_for_shift(k_idx, delta_int, g)
        if lam is None:
            continue
        sv = float(np.linalg.svd(lam, compute_uv=False)[-1])
        if best is None or sv > best.sigma_min:
            best = ShiftChoice(g_coords=(int(g[0]), int(g[1])), sigma_min=sv, matrix=lam)
    if best is None or best.sigma_min <= INVERTIBLE_SV:
        achieved = 0.0 if best is None else best.sigma_min
        raise NoInvertibleShiftError(
            f"no invertible form factor for step {tuple(delta_int)} at k index "
            f"{k_idx}: best sigma_min = {achieved:.3e}")
    return best


@dataclass(frozen=True)
class PropagationPath:
    """Walk data: visited momenta, per-step shifts, and conditioning."""

    k_indices: list
    step_deltas: list
    shifts: list
    condition_product: float


def _grid_step(grid, a: int, b: int) -> tuple[int, int]:
    """Minimal-image integer step from grid point a to b."""
    ia, ja = grid.ij[a]
    ib, jb = grid.ij[b]
    di = (ib - ia + grid.n_kx//2) % grid.n_kx - grid.n_kx//2
    dj = (jb - ja + grid.n_ky//2) % grid.n_ky - grid.n_ky//2
    return int(di), int(dj)


def propagate_block(table: FormFactorTable, block: np.ndarray, k1_idx: int,
                    k2_idx: int, q_idx: int,
                    connectivity: ConnectivityReport) -> tuple[np.ndarray, PropagationPath]:
    """Transport P(k1, k2) to P(k1+q, k2+q) along a connectivity path.

    Returns the propagated block and the path diagnostics.  The result
    equals the directly stored block for genuine ground states; for other
    inputs it is still a rank-preserving conjugation.
    """
    grid = table.grid
    target, _ = grid.add(k1_idx, q_idx)
    path = connectivity.witness_path(k1_idx, target)
    if path is None:
        raise SingularStepError(
            f"momenta {k1_idx} and {target} are not connected on the grid graph")
    delta_12 = _grid_step(grid, k1_idx, k2_idx)

    out = np.array(block, dtype=complex)
    deltas, shifts = [], []
    cond = 1.0
    for a, b in zip(path[:-1], path[1:]):
        step = _grid_step(grid, a, b)
        choice = select_invertible_shift(table, a, step)
        left = choice.matrix
        # right factor: Lambda at the second momentum of the pair, same shift
        a2 = grid.index(grid.ij[a][0] + delta_12[0], grid.ij[a][1] + delta_12[1])
        right = table.entry_for_shift(a2, step, choice.g_coords)
        if right is None:
            raise SingularStepError(
                f"companion form factor missing for step {step} at k index {a2}")
        sv = np.linalg.svd(left, compute_uv=False)
        if sv[-1] <= INVERTIBLE_SV:
            raise SingularStepError(f"singular step matrix at k index {a}")
        cond *= float(sv[0]/sv[-1])
        out = np.linalg.solve(left, out) @ right
        deltas.append(step)
        shifts.append(choice)
    return out, PropagationPath(k_indices=list(path), step_deltas=deltas,
                                shifts=shifts, condition_product=cond)


def loop_consistency(table: FormFactorTable, state: DensityMatrix, k1_idx: int,
                     k2_idx: int, loop: list[int],
                     connectivity: ConnectivityReport) -> float:
    """Transport a block around a closed loop of grid steps and compare.

    `loop` is a list of q indices whose grid sum is zero.  Returns the
    max-abs deviation between the original block and the round trip.
    """
    grid = table.grid
    block = state.block(k1_idx, k2_idx)
    cur_1, cur_2 = k1_idx, k2_idx
    cur = block
    for q_idx in loop:
        cur, _ = propagate_block(table, cur, cur_1, cur_2, q_idx, connectivity)
        cur_1, _ = grid.add(cur_1, q_idx)
        cur_2, _ = grid.add(cur_2, q_idx)
    if (cur_1, cur_2) != (k1_idx, k2_idx):
        raise ValueError("loop does not close on the grid")
    return float(np.abs(cur - block).max())


def uniform_filling_check(state: DensityMatrix) -> float:
    """max_k |Tr P(k,k) - Tr P(k0,k0)| over the grid."""
    traces = [float(np.trace(state.block(a, a)).real)
              for a in range(state.grid.n_k)]
    return float(max(abs(t - traces[0]) for t in traces))
