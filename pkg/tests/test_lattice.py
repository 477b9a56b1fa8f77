import numpy as np
import pytest

from fbihf.errors import GridMismatchError
from fbihf.lattice import (build_kgrid, build_lattice, fold_momentum, gshells,
                           rotation)


def test_duality(lattice):
    assert abs(lattice.a1 @ lattice.g1 - 2*np.pi) < 1e-12
    assert abs(lattice.a2 @ lattice.g2 - 2*np.pi) < 1e-12
    assert abs(lattice.a1 @ lattice.g2) < 1e-12
    assert abs(lattice.a2 @ lattice.g1) < 1e-12


def test_q_vectors_rotations(lattice):
    q0, q1, q2 = lattice.q_vectors
    assert np.allclose(q1, rotation(2*np.pi/3) @ q0, atol=1e-14)
    assert np.allclose(q2, rotation(2*np.pi/3) @ q1, atol=1e-14)
    norms = np.linalg.norm(lattice.q_vectors, axis=1)
    assert np.allclose(norms, norms[0], atol=1e-14)


def test_q_differences_generate_reciprocal(lattice):
    assert np.allclose(lattice.q_vectors[1] - lattice.q_vectors[0], lattice.g1)
    assert np.allclose(lattice.q_vectors[2] - lattice.q_vectors[0], lattice.g2)


def test_area(lattice):
    gmat = np.column_stack([lattice.g1, lattice.g2])
    assert abs(lattice.area_omega - (2*np.pi)**2/abs(np.linalg.det(gmat))) < 1e-12


def test_unknown_convention():
    with pytest.raises(ValueError):
        build_lattice("exotic")


def test_kgrid_single_point(lattice):
    grid = build_kgrid(lattice, 1, 1)
    assert grid.n_k == 1
    assert np.allclose(grid.points[0], 0.0)


def test_kgrid_2x2_points(lattice):
    grid = build_kgrid(lattice, 2, 2)
    assert grid.n_k == 4
    expected = [np.zeros(2), lattice.g2/2, lattice.g1/2, (lattice.g1 + lattice.g2)/2]
    for want in expected:
        assert any(np.allclose(p, want) for p in grid.points)


def test_kgrid_4x4_distinct_mod_lattice(lattice, grid4):
    # pairwise differences of distinct points are never reciprocal vectors
    for a in range(grid4.n_k):
        for b in range(a + 1, grid4.n_k):
            f = lattice.frac_coords(grid4.points[a] - grid4.points[b])
            assert np.abs(f - np.rint(f)).max() > 1e-6


def test_kgrid_rejects_zero_counts(lattice):
    with pytest.raises(ValueError):
        build_kgrid(lattice, 0, 4)
    with pytest.raises(ValueError):
        build_kgrid(lattice, 4, -1)


def test_fold_reciprocal_vector(lattice, grid4):
    res = fold_momentum(grid4, lattice.g1)
    assert res.k_index == grid4.index(0, 0)
    assert res.g_coords == (1, 0)


def test_fold_grid_point_is_trivial(grid4):
    for x in range(grid4.n_k):
        res = fold_momentum(grid4, grid4.points[x])
        assert res.k_index == x
        assert res.g_coords == (0, 0)


def test_fold_exhaustive_table(lattice, grid4):
    # brute force over all (k, q, G): fold(k + q + G) must match integer
    # arithmetic done independently on the grid coordinates
    shells = gshells(lattice, 2*np.linalg.norm(lattice.g1))
    for kx in range(grid4.n_k):
        for qx in range(grid4.n_k):
            k2, carry = grid4.add(kx, qx)
            for (ga, gb), gv in zip(shells.coords, shells.vectors):
                p = grid4.points[kx] + grid4.points[qx] + gv
                res = fold_momentum(grid4, p)
                assert res.k_index == k2
                assert res.g_coords == (carry[0] + ga, carry[1] + gb)


def test_fold_idempotent(grid4):
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = int(rng.integers(grid4.n_k))
        g = rng.integers(-3, 4, size=2)
        p = grid4.points[x] + g[0]*grid4.lattice.g1 + g[1]*grid4.lattice.g2
        res = fold_momentum(grid4, p)
        again = fold_momentum(grid4, grid4.points[res.k_index])
        assert again.k_index == res.k_index
        assert again.g_coords == (0, 0)


def test_fold_translation_covariance(lattice, grid4):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = int(rng.integers(grid4.n_k))
        base = fold_momentum(grid4, grid4.points[x])
        shift = rng.integers(-2, 3, size=2)
        p = grid4.points[x] + shift[0]*lattice.g1 + shift[1]*lattice.g2
        res = fold_momentum(grid4, p)
        assert res.k_index == base.k_index
        assert res.g_coords == (base.g_coords[0] + shift[0],
                                base.g_coords[1] + shift[1])


def test_fold_off_lattice_rejected(grid4):
    with pytest.raises(GridMismatchError):
        fold_momentum(grid4, np.array([0.1237, 0.777]))


def test_gshells_origin_only(lattice):
    sh = gshells(lattice, 0.0)
    assert len(sh) == 1
    assert tuple(sh.coords[0]) == (0, 0)


def test_gshells_first_shell(lattice):
    sh = gshells(lattice, np.linalg.norm(lattice.g1))
    assert len(sh) == 7  # origin plus hexagonal first shell


def test_gshells_count_vs_box_enumeration(lattice):
    # independent oracle: enumerate an enclosing box and count by radius
    radius = 4*np.linalg.norm(lattice.g1)
    count = 0
    for a in range(-12, 13):
        for b in range(-12, 13):
            v = a*lattice.g1 + b*lattice.g2
            if np.hypot(*v) <= radius + 1e-9:
                count += 1
    assert len(gshells(lattice, radius)) == count


def test_gshells_negation_closed(lattice):
    sh = gshells(lattice, 3*np.linalg.norm(lattice.g1))
    have = {tuple(c) for c in sh.coords}
    assert all((-a, -b) in have for (a, b) in have)


def test_gshells_deterministic_order(lattice):
    sh = gshells(lattice, 4*np.linalg.norm(lattice.g1))
    radii = np.linalg.norm(sh.vectors, axis=1)
    assert np.all(np.diff(radii) >= -1e-9)
    sh2 = gshells(lattice, 4*np.linalg.norm(lattice.g1))
    assert np.array_equal(sh.coords, sh2.coords)


def test_gshells_shift_map(lattice):
    sh = gshells(lattice, 2*np.linalg.norm(lattice.g1))
    mp = sh.shift_map((1, 0))
    for i, (a, b) in enumerate(sh.coords):
        j = sh.index_of((a + 1, b))
        assert mp[i] == (j if j is not None else -1)


def test_centered_points_are_lattice_translates(lattice, grid4):
    for x in range(grid4.n_k):
        diff = grid4.centered_points[x] - grid4.points[x]
        f = lattice.frac_coords(diff)
        assert np.abs(f - np.rint(f)).max() < 1e-12
        assert np.allclose(np.rint(f), grid4.centered_offsets[x])
        # minimal norm among nearby translates
        for o1 in range(-2, 3):
            for o2 in range(-2, 3):
                v = grid4.points[x] + o1*lattice.g1 + o2*lattice.g2
                assert np.linalg.norm(grid4.centered_points[x]) <= np.linalg.norm(v) + 1e-12
