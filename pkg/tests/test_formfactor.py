import numpy as np
import pytest

from fbihf.errors import ConventionError
from fbihf.flatband import evaluate_state, make_rgrid
from fbihf.formfactor import (FormFactorTable, compute_table,
                              dagger_identity_residual, extend_flavor,
                              pair_product, pair_product_direct, parseval_gap,
                              shell_tail_profile, shift_invariance_residual,
                              sum_rule_check)


def test_normalization_identity(table4):
    q0 = table4.grid.index(0, 0)
    g0 = table4.shells.index_of((0, 0))
    for k in range(table4.grid.n_k):
        assert np.linalg.norm(table4.data[k, q0, g0] - np.eye(2)) <= 1e-10


def test_dagger_identity(table4):
    assert dagger_identity_residual(table4) <= 1e-10


def test_shift_invariance(table4):
    assert shift_invariance_residual(table4, n_samples=24, seed=1) <= 1e-10


def test_entry_for_shift_carry_consistency(table4):
    grid = table4.grid
    # delta wrapped by a full grid period lands on the same entry with the
    # compensating reciprocal shift
    a = table4.entry_for_shift(3, (1, 2), (0, 0))
    b = table4.entry_for_shift(3, (1 + grid.n_kx, 2), (-1, 0))
    assert a is not None and b is not None
    assert np.array_equal(a, b)
    assert table4.entry_for_shift(3, (0, 0), (99, 99)) is None


def test_chiral_gauge_diagonal(table4):
    off = np.abs(table4.data[..., 0, 1]).max(), np.abs(table4.data[..., 1, 0]).max()
    assert max(off) <= 1e-8
    # the two diagonal entries are conjugates by the sublattice pairing
    dev = np.abs(table4.data[..., 1, 1] - table4.data[..., 0, 0].conj()).max()
    assert dev <= 1e-12


def test_sum_rule(table4):
    assert sum_rule_check(table4) <= 1e-8*table4.grid.n_k
    # zero transfer contributes exactly nothing
    q0 = table4.grid.index(0, 0)
    g0 = table4.shells.index_of((0, 0))
    sz = np.diag([1.0, -1.0])
    vals = [np.trace(table4.data[k, q0, g0] @ sz) for k in range(table4.grid.n_k)]
    assert np.abs(np.sum(vals)) < 1e-12
    # a single-momentum subsum is generically far from zero
    g1_idx = table4.shells.index_of((1, 0))
    single = np.trace(table4.data[5, q0, g1_idx] @ sz)
    assert abs(single) > 1e-4


def test_sum_rule_flavor_guard(valley_table):
    with pytest.raises(ValueError):
        sum_rule_check(valley_table)


def test_pair_product_cell_average(table4):
    rgrid = make_rgrid(table4.grid.lattice, 24)
    rho = pair_product(table4, 3, 3, rgrid.points)
    avg = rho.mean(axis=0)
    assert np.abs(avg - np.eye(2)).max() < 1e-10


def test_pair_product_density_structure(bundle4, table4):
    # rho_{k,k}(r) = diag(||u_k(r)||^2, ||u_k(-r)||^2) in the chiral gauge.
    # The diag-swap-under-inversion and vanishing off-diagonals are exact
    # structural facts of the table; the identification with the evaluated
    # state density is limited by the table's Fourier tail.
    rgrid = make_rgrid(table4.grid.lattice, 12)
    x = 6
    rho = pair_product(table4, x, x, rgrid.points)
    assert np.abs(rho[:, 0, 1]).max() <= 1e-12
    assert np.abs(rho[:, 1, 0]).max() <= 1e-12
    assert np.abs(rho[:, 1, 1] - rho[rgrid.inversion_index, 0, 0]).max() <= 1e-12
    assert np.abs(rho[:, 0, 0].imag).max() <= 1e-12
    u = evaluate_state(bundle4.basis, bundle4.coeffs[x, 0], rgrid.points)
    dens = np.sum(np.abs(u)**2, axis=-1)
    assert np.abs(rho[:, 0, 0].real - dens).max() <= 1e-6
    # direct-product route: off-diagonals vanish identically (disjoint
    # sublattice support), at the stated 1e-8
    both = evaluate_state(bundle4.basis, bundle4.coeffs[x], rgrid.points)
    cross = np.einsum("pc,pc->p", both[0].conj(), both[1])
    assert np.abs(cross).max() <= 1e-8


def test_pair_product_matches_direct(table4):
    rng = np.random.default_rng(11)
    rgrid = make_rgrid(table4.grid.lattice, 10)
    worst = 0.0
    for _ in range(10):
        ka = int(rng.integers(table4.grid.n_k))
        kb = int(rng.integers(table4.grid.n_k))
        pts = rgrid.points[rng.integers(len(rgrid.points), size=4)]
        a = pair_product(table4, ka, kb, pts)
        b = pair_product_direct(table4, ka, kb, pts)
        worst = max(worst, float(np.abs(a - b).max()))
    assert worst <= 1e-6


def test_parseval(table4):
    for q_idx in (0, 1, 7):
        assert parseval_gap(table4, 2, q_idx) <= 1e-6


def test_tail_decay_monotone(table4):
    profile = shell_tail_profile(table4)
    tail = profile[:, 1]
    assert np.all(np.diff(tail) <= 1e-30)
    assert not table4.tail_warning


def test_valley_normalization(valley_table):
    q0 = valley_table.grid.index(0, 0)
    g0 = valley_table.shells.index_of((0, 0))
    for k in range(valley_table.grid.n_k):
        assert np.linalg.norm(valley_table.data[k, q0, g0] - np.eye(4)) <= 1e-10


def test_valley_density_pattern(bundle4, valley_table):
    # diag(a, b, b, a) with a = ||u_k(r)||^2, b = ||u_k(-r)||^2 at q' = 0.
    # Pattern equalities across the valleys are exact; the identification
    # with the evaluated density carries the Fourier tail.
    rgrid = make_rgrid(valley_table.grid.lattice, 12)
    x = 9
    rho = pair_product(valley_table, x, x, rgrid.points)
    mask = ~np.eye(4, dtype=bool)
    assert np.abs(rho[:, mask]).max() <= 1e-12
    assert np.abs(rho[:, 3, 3] - rho[:, 0, 0]).max() <= 1e-12
    assert np.abs(rho[:, 2, 2] - rho[:, 1, 1]).max() <= 1e-12
    assert np.abs(rho[:, 1, 1] - rho[rgrid.inversion_index, 0, 0]).max() <= 1e-12
    u = evaluate_state(bundle4.basis, bundle4.coeffs[x, 0], rgrid.points)
    a = np.sum(np.abs(u)**2, axis=-1)
    b = a[rgrid.inversion_index]
    for idx, want in ((0, a), (1, b), (2, b), (3, a)):
        assert np.abs(rho[:, idx, idx].real - want).max() <= 1e-6


def test_spinful_is_valley_tensor_identity(valley_table, vs_table):
    want = np.einsum("kqgmn,st->kqgmsnt", valley_table.data, np.eye(2))
    want = want.reshape(vs_table.data.shape)
    assert np.array_equal(vs_table.data, want)


def test_extend_flavor_guards(table4, valley_table):
    with pytest.raises(ValueError):
        extend_flavor(valley_table, "valley_spin")
    with pytest.raises(ValueError):
        extend_flavor(table4, "flavorless")


def test_extend_flavor_validation_rejects_corruption(table4):
    broken = FormFactorTable(bundle=table4.bundle, shells=table4.shells,
                             flavor="spinless",
                             data=np.array(table4.data), tail_fraction=0.0,
                             tail_warning=False)
    broken.data[:, :, :, 0, 0] *= np.exp(0.3j)    # breaks the conjugate pairing
    with pytest.raises(ConventionError):
        extend_flavor(broken, "valley")


def test_tail_metadata_records_warning(bundle4):
    tiny = compute_table(bundle4, cutoff=1.1*np.linalg.norm(bundle4.lattice.g1))
    assert tiny.tail_fraction > 1e-8
    assert tiny.tail_warning
