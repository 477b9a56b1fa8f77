"""Flat-band interacting model of chiral twisted bilayer graphene.

Builds the chiral-limit moire Hamiltonian, extracts gauge-fixed flat bands
at the magic coupling, assembles projected-interaction form factors, and
verifies the Hartree-Fock ground-state structure: ferromagnetic Slater
determinants, their symmetry orbits, and the absence of translation
breaking via coupled Sylvester equations, all cross-checked against
brute-force Fock-space oracles at desk scale.
"""

from .chiral import PlaneWaveBasis, assemble_d, assemble_h, build_basis
from .flatband import (BlochBundle, MagicAlphaResult, build_bundle,
                       check_grid_assumption, evaluate_state, find_magic_alpha,
                       flat_band_states, make_rgrid, theta_oracle, zero_location)
from .flavors import block_size, chern_operator, generators, valley_permutation
from .formfactor import (FormFactorTable, compute_table, extend_flavor,
                         pair_product, pair_product_direct, sum_rule_check)
from .hartree_fock import (DensityMatrix, EnergyWorkspace, Interaction,
                           build_fm_state, energy_commutator_form,
                           energy_trace_form, gs_condition_residuals,
                           momentum_shift_matrix, random_half_filled_projector,
                           uniform_state)
from .lattice import (KGrid, MoireLattice, build_kgrid, build_lattice,
                      fold_momentum, gshells)
from .sylvester import (build_pair_matrix, disjoint_spectra_check, kernel_basis,
                        resolve_antipodal, scan_pairs, solve_pair)

__version__ = "0.1.0"
