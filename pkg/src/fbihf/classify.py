"""Ground-state manifolds: generator states, symmetry orbits, Chern checks.

Orbit states are built as P(k,k) = Pi U (Pi P0 Pi) U^dag Pi with
U = diag(U1, U2) block diagonal in the Pi-permuted basis, constant over the
grid, off-diagonal blocks zero.  Quantum-Hall generators occupy a full
Chern block, so their orbits are single points; the mixed generators sweep
manifolds that include intervalley-coherent states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flavors import (block_size, chern_operator, generators, orbit_block_size,
                      valley_permutation)
from .formfactor import FormFactorTable
from .hartree_fock import (ConditionResiduals, DensityMatrix, EnergyWorkspace,
                           Interaction, energy_commutator_form,
                           gs_condition_residuals, uniform_state)


@dataclass(frozen=True)
class SymmetryElement:
    """Block unitary diag(U1, U2) in the Pi-permuted basis."""

    flavor: str
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        n = orbit_block_size(self.flavor)
        for u in (self.u1, self.u2):
            if u.shape != (n, n):
                raise ValueError(f"orbit blocks for {self.flavor!r} must be {n}x{n}")
            if np.abs(u.conj().T @ u - np.eye(n)).max() > 1e-12:
                raise ValueError("orbit block is not unitary")

    @property
    def block_matrix(self) -> np.ndarray:
        n = orbit_block_size(self.flavor)
        out = np.zeros((2*n, 2*n), dtype=complex)
        out[:n, :n] = self.u1
        out[n:, n:] = self.u2
        return out

    def identity_like(self) -> bool:
        n = orbit_block_size(self.flavor)
        return bool(np.abs(self.u1 - np.eye(n)).max() < 1e-14
                    and np.abs(self.u2 - np.eye(n)).max() < 1e-14)


def identity_element(flavor: str) -> SymmetryElement:
    n = orbit_block_size(flavor)
    return SymmetryElement(flavor=flavor, u1=np.eye(n, dtype=complex),
                           u2=np.eye(n, dtype=complex))


def random_block_unitary(flavor: str, rng) -> SymmetryElement:
    """QR-frame random element of U(n) x U(n) with a deterministic phase fix."""
    n = orbit_block_size(flavor)
    blocks = []
    for _ in range(2):
        x = rng.normal(size=(n, n)) + 1j*rng.normal(size=(n, n))
        q, r = np.linalg.qr(x)
        q = q*(np.diagonal(r)/np.abs(np.diagonal(r)))
        blocks.append(q)
    return SymmetryElement(flavor=flavor, u1=blocks[0], u2=blocks[1])


def orbit_block(p0: np.ndarray, element: SymmetryElement) -> np.ndarray:
    """Single-momentum block Pi U (Pi P0 Pi) U^dag Pi in the original basis."""
    pi = valley_permutation(element.flavor)
    u = element.block_matrix
    return pi @ u @ (pi @ p0 @ pi) @ u.conj().T @ pi


@dataclass(frozen=True)
class OrbitSample:
    state: DensityMatrix
    residuals: ConditionResiduals
    energy: float
    chern_residual: float


def sample_orbit(table: FormFactorTable, generator_index: int,
                 element: SymmetryElement, interaction: Interaction,
                 workspace: EnergyWorkspace | None = None) -> OrbitSample:
    """Materialize one orbit state and evaluate its ground-state conditions."""
    if element.flavor != table.flavor:
        raise ValueError("symmetry element flavor does not match table")
    p0 = generators(table.flavor)[generator_index]
    block = orbit_block(p0, element)
    state = uniform_state(table, block)
    res = gs_condition_residuals(state, table, interaction, workspace=workspace)
    energy = energy_commutator_form(state, table, interaction, workspace=workspace)
    chern = chern_commutation_check(state) if table.flavor != "spinless" else 0.0
    return OrbitSample(state=state, residuals=res, energy=energy, chern_residual=chern)


def chern_commutation_check(state: DensityMatrix) -> float:
    """max_k ||[C, P(k,k)]||_F with C the Chern-number operator."""
    c = chern_operator(state.flavor)
    worst = 0.0
    for a in range(state.grid.n_k):
        blk = state.block(a, a)
        worst = max(worst, float(np.linalg.norm(c @ blk - blk @ c)))
    return worst


def orbit_is_singleton(flavor: str, generator_index: int) -> bool:
    """True for generators occupying one full Chern block (QH states)."""
    p0 = generators(flavor)[generator_index]
    pi = valley_permutation(flavor) if flavor != "spinless" else np.eye(block_size(flavor))
    pp = pi @ p0 @ pi
    n = pp.shape[0]//2
    top, bottom = pp[:n, :n], pp[n:, n:]
    return bool(np.allclose(top, np.eye(n)) and np.allclose(bottom, 0)
                or np.allclose(top, 0) and np.allclose(bottom, np.eye(n)))


@dataclass(frozen=True)
class OrbitSweep:
    flavor: str
    generator_index: int
    singleton: bool
    samples: list
    max_trace_residual: float
    max_commutator_residual: float
    max_chern_residual: float
    energy_spread: float
    orbit_diameter: float


def sweep_generator(table: FormFactorTable, generator_index: int,
                    interaction: Interaction, n_samples: int = 20,
                    seed: int = 0,
                    workspace: EnergyWorkspace | None = None) -> OrbitSweep:
    """Random orbit sweep of one generator, including the identity element.

    orbit_diameter measures how far the sampled states actually move from
    the generator; singleton orbits stay at zero diameter while unitaries
    vary.
    """
    rng = np.random.default_rng(seed)
    ws = workspace or EnergyWorkspace(table, interaction)
    elements = [identity_element(table.flavor)]
    elements += [random_block_unitary(table.flavor, rng) for _ in range(n_samples - 1)]
    samples = [sample_orbit(table, generator_index, el, interaction, workspace=ws)
               for el in elements]
    p_ref = samples[0].state.block(0, 0)
    diameter = max(float(np.abs(s.state.block(0, 0) - p_ref).max()) for s in samples)
    energies = [s.energy for s in samples]
    return OrbitSweep(
        flavor=table.flavor,
        generator_index=generator_index,
        singleton=orbit_is_singleton(table.flavor, generator_index),
        samples=samples,
        max_trace_residual=max(s.residuals.trace_residual for s in samples),
        max_commutator_residual=max(s.residuals.commutator_residual for s in samples),
        max_chern_residual=max(s.chern_residual for s in samples),
        energy_spread=float(max(energies) - min(energies)),
        orbit_diameter=diameter,
    )
