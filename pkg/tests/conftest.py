"""Session fixtures: one desk-scale build shared by the whole suite."""

import numpy as np
import pytest

from fbihf.chiral import build_basis
from fbihf.flatband import build_bundle, check_grid_assumption, find_magic_alpha
from fbihf.formfactor import compute_table, extend_flavor
from fbihf.hartree_fock import EnergyWorkspace, Interaction
from fbihf.lattice import build_kgrid, build_lattice

PW_SHELLS = 8.0


@pytest.fixture(scope="session")
def lattice():
    return build_lattice()


@pytest.fixture(scope="session")
def grid4(lattice):
    return build_kgrid(lattice, 4, 4)


@pytest.fixture(scope="session")
def basis6(lattice):
    return build_basis(lattice, PW_SHELLS*np.linalg.norm(lattice.g1))


@pytest.fixture(scope="session")
def alpha_star(basis6):
    return find_magic_alpha(basis6, interval=(0.3, 0.9), tol=1e-7)


@pytest.fixture(scope="session")
def bundle4(grid4, basis6, alpha_star):
    return build_bundle(grid4, alpha_star.alpha_star, basis6)


@pytest.fixture(scope="session")
def table4(bundle4):
    return compute_table(bundle4)


@pytest.fixture(scope="session")
def valley_table(table4):
    return extend_flavor(table4, "valley")


@pytest.fixture(scope="session")
def vs_table(table4):
    return extend_flavor(table4, "valley_spin")


@pytest.fixture(scope="session")
def yukawa():
    return Interaction(family="yukawa", kappa=1.0)


@pytest.fixture(scope="session")
def workspace4(table4, yukawa):
    return EnergyWorkspace(table4, yukawa)


@pytest.fixture(scope="session")
def connectivity4(bundle4):
    return check_grid_assumption(bundle4)


@pytest.fixture(scope="session")
def bundle21(lattice, basis6, alpha_star):
    grid = build_kgrid(lattice, 2, 1)
    return build_bundle(grid, alpha_star.alpha_star, basis6)


@pytest.fixture(scope="session")
def table21(bundle21):
    return compute_table(bundle21)
