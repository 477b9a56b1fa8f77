import numpy as np
import pytest

from fbihf.chiral import (L_MATRIX, Q_MATRIX, assemble_d, assemble_h,
                          build_basis, q_conjugate_h, q_fiber_action,
                          symmetry_action)
from fbihf.flatband import make_rgrid


def diag_symbols(k, basis):
    p1, p2 = basis.layer_momenta(k)
    return np.concatenate([p1[:, 0] + 1j*p1[:, 1], p2[:, 0] + 1j*p2[:, 1]])


def test_free_model_origin_is_diagonal(basis6):
    op = assemble_d(np.zeros(2), 0.0, basis6)
    off = op.matrix - np.diag(np.diagonal(op.matrix))
    assert np.abs(off).max() == 0.0
    s = op.singular_values()
    # layer Dirac points sit off the zone origin, so no exact zero mode here
    assert s[-1] > 0.0
    assert np.isclose(s[-1], np.abs(diag_symbols(np.zeros(2), basis6)).min())


def test_free_model_smallest_singular_value(basis6):
    rng = np.random.default_rng(1)
    for _ in range(5):
        k = rng.normal(size=2)
        op = assemble_d(k, 0.0, basis6)
        expect = np.abs(diag_symbols(k, basis6)).min()
        assert np.isclose(op.singular_values()[-1], expect, atol=1e-12)


def test_flat_band_at_magic_alpha(basis6, alpha_star, grid4):
    for x in (0, 3, 9):
        k = grid4.centered_points[x]
        s = assemble_d(k, alpha_star.alpha_star, basis6).singular_values()
        assert s[-1] <= 1e-8


def test_h_is_hermitian(basis6, alpha_star):
    rng = np.random.default_rng(2)
    for _ in range(3):
        h = assemble_h(rng.normal(size=2), alpha_star.alpha_star, basis6)
        assert np.abs(h - h.conj().T).max() <= 1e-13*np.abs(h).max()


def test_spectrum_pairs(basis6, alpha_star):
    k = np.array([0.21, -0.37])
    eigs = np.linalg.eigvalsh(assemble_h(k, alpha_star.alpha_star, basis6))
    assert np.abs(eigs + eigs[::-1]).max() <= 1e-10


def test_free_spectrum_magnitudes(basis6):
    # at alpha = 0 the positive spectrum is the set of |k + G +- q0|
    k = np.array([0.11, 0.07])
    eigs = np.linalg.eigvalsh(assemble_h(k, 0.0, basis6))
    mags = np.sort(np.abs(diag_symbols(k, basis6)))
    pos = np.sort(eigs)[eigs.size//2:]
    assert np.allclose(pos, mags, atol=1e-10)


def test_two_flat_eigenvalues_on_grid(basis6, alpha_star, grid4):
    for x in range(0, grid4.n_k, 5):
        k = grid4.centered_points[x]
        eigs = np.linalg.eigvalsh(assemble_h(k, alpha_star.alpha_star, basis6))
        mid = eigs.size//2
        assert max(abs(eigs[mid - 1]), abs(eigs[mid])) <= 1e-8


def test_d_translation_conjugation(basis6, alpha_star, lattice):
    # D_{k+G} equals D_k with plane-wave labels shifted, on the cutoff interior
    k = np.array([0.05, -0.12])
    d1 = assemble_d(k, alpha_star.alpha_star, basis6).matrix
    d2 = assemble_d(k + lattice.g1, alpha_star.alpha_star, basis6).matrix
    mp = basis6.shells.shift_map((1, 0))
    inner = (mp >= 0) & ~basis6.boundary_mask
    idx = np.where(inner)[0]
    n = basis6.n_g
    for layer in (0, 1):
        a = d1[np.ix_(layer*n + mp[idx], layer*n + mp[idx])]
        b = d2[np.ix_(layer*n + idx, layer*n + idx)]
        assert np.abs(a - b).max() < 1e-12


def test_interior_cutoff_stability(lattice, alpha_star):
    gn = np.linalg.norm(lattice.g1)
    k = np.array([0.17, 0.23])
    svals = []
    for shells in (6.0, 7.0):
        basis = build_basis(lattice, shells*gn)
        s = assemble_d(k, alpha_star.alpha_star, basis).singular_values()
        svals.append(np.array([s[-1], s[-2]]))
    assert np.abs(svals[0] - svals[1]).max() < 1e-8


def test_small_basis_rejected(lattice):
    with pytest.raises(ValueError):
        build_basis(lattice, 0.1)


def test_q_involution_realspace(lattice):
    rgrid = make_rgrid(lattice, 8)
    rng = np.random.default_rng(3)
    u = rng.normal(size=(len(rgrid.points), 4)) + 1j*rng.normal(size=(len(rgrid.points), 4))
    qq = symmetry_action("Q", symmetry_action("Q", u, rgrid.inversion_index),
                         rgrid.inversion_index)
    assert np.abs(qq - u).max() < 1e-14


def test_q_l_commute_realspace(lattice):
    rgrid = make_rgrid(lattice, 8)
    rng = np.random.default_rng(4)
    for _ in range(5):
        u = rng.normal(size=(len(rgrid.points), 4)) + 1j*rng.normal(size=(len(rgrid.points), 4))
        ql = symmetry_action("Q", symmetry_action("L", u, rgrid.inversion_index),
                             rgrid.inversion_index)
        lq = symmetry_action("L", symmetry_action("Q", u, rgrid.inversion_index),
                             rgrid.inversion_index)
        assert np.abs(ql - lq).max() < 1e-14


def test_symmetry_matrices_algebra():
    assert np.array_equal(Q_MATRIX @ Q_MATRIX, np.eye(4))
    assert np.array_equal(Q_MATRIX @ L_MATRIX, L_MATRIX @ Q_MATRIX)
    assert np.array_equal(L_MATRIX @ L_MATRIX, -np.eye(4))


def test_q_fiber_action_involution(basis6):
    rng = np.random.default_rng(5)
    c = rng.normal(size=(basis6.n_g, 4)) + 1j*rng.normal(size=(basis6.n_g, 4))
    assert np.abs(q_fiber_action(q_fiber_action(c)) - c).max() == 0.0


def test_q_commutes_with_h(basis6, alpha_star):
    # the displayed action composed with conjugation-inversion commutes with
    # H_k on every fiber (measured, not assumed: the sign is a convention)
    rng = np.random.default_rng(6)
    for _ in range(3):
        k = rng.normal(size=2)
        h = assemble_h(k, alpha_star.alpha_star, basis6)
        assert np.abs(q_conjugate_h(h) - h).max() < 1e-12
