"""Magic coupling search, gauge-fixed flat-band Bloch vectors, grid
connectivity, and the analytic theta-function oracle.

Band convention (chiral gauge): band 0 is the sublattice-A zero mode of H_k
(a kernel vector of D_k) and band 1 = Q(band 0) is its sublattice-B partner
with complex-conjugated coefficients.  With this ordering the same-momentum
pair product is diag(||u_k(r)||^2, ||u_k(-r)||^2) where u_k is the band-0
amplitude, and u_k vanishes at r = 4 pi/(3 sqrt 3) (k_2, -k_1).

Stored coefficient arrays have shape (n_bands=2, n_G, 4) with component
order (A1, A2, B1, B2) and are normalized to sum_G ||uhat||^2 = |Omega|.
Each grid point is solved at its minimal-norm lattice translate
(grid.centered_points) so the cutoff ball stays centered; downstream index
arithmetic must go through the integer offsets recorded on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chiral import PlaneWaveBasis, assemble_d, q_fiber_action
from .errors import DegenerateGaugeError, NotFlatError, SearchFailureError
from .lattice import KGrid, MoireLattice
from .theta import theta1

GOLDEN = (np.sqrt(5.0) - 1.0)/2.0


@dataclass(frozen=True)
class MagicAlphaResult:
    alpha_star: float
    residual: float
    interval: tuple[float, float]

    def __float__(self) -> float:
        return self.alpha_star


def find_magic_alpha(basis: PlaneWaveBasis, interval=(0.3, 0.9), tol: float = 1e-7,
                     k_sample=None, iterations: int = 80) -> MagicAlphaResult:
    """Locate the magic coupling by golden-section search.

    Minimizes max over the k sample of sigma_min(D_k(alpha)); the default
    sample is the Brillouin-zone corner plus one generic momentum.  Raises
    SearchFailureError when the achieved residual exceeds `tol`.
    """
    lat = basis.lattice
    if k_sample is None:
        k_sample = [(lat.g1 + lat.g2)/3.0, 0.1234*lat.g1 + 0.4321*lat.g2]

    def worst(alpha: float) -> float:
        return max(float(np.linalg.svd(assemble_d(k, alpha, basis).matrix,
                                       compute_uv=False)[-1])
                   for k in k_sample)

    lo, hi = float(interval[0]), float(interval[1])
    x1 = hi - GOLDEN*(hi - lo)
    x2 = lo + GOLDEN*(hi - lo)
    f1, f2 = worst(x1), worst(x2)
    for _ in range(iterations):
        if hi - lo < 1e-12:
            break
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN*(hi - lo)
            f1 = worst(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN*(hi - lo)
            f2 = worst(x2)
    alpha = 0.5*(lo + hi)
    res = worst(alpha)
    if res > tol:
        raise SearchFailureError(
            f"no flat band in [{interval[0]}, {interval[1]}]: "
            f"best residual {res:.3e} > tol {tol:.1e}", achieved=res)
    return MagicAlphaResult(alpha_star=alpha, residual=res,
                            interval=(float(interval[0]), float(interval[1])))


def flat_band_states(k, alpha: float, basis: PlaneWaveBasis,
                     residual_tol: float = 1e-6) -> np.ndarray:
    """Two gauge-fixed flat-band vectors at momentum k, shape (2, n_G, 4).

    Band 0 is the smallest right-singular vector of D_k placed in the A
    components with its largest coefficient rotated real positive; band 1 is
    its Q image (conjugate coefficients in the B components).  Raises
    NotFlatError if sigma_min exceeds residual_tol and DegenerateGaugeError
    if the kernel direction is not isolated.
    """
    n_g = basis.n_g
    dmat = assemble_d(k, alpha, basis).matrix
    _, s, vh = np.linalg.svd(dmat)
    if s[-1] > residual_tol:
        raise NotFlatError(f"sigma_min(D_k) = {s[-1]:.3e} > {residual_tol:.1e} at k = {k}")
    if s[-2] < 10*max(s[-1], 1e-14):
        raise DegenerateGaugeError(
            f"flat-band direction not isolated at k = {k}: s = {s[-2]:.3e}, {s[-1]:.3e}")
    v = vh[-1].conj()
    i = int(np.argmax(np.abs(v)))
    v = v*np.exp(-1j*np.angle(v[i]))
    v[i] = abs(v[i])
    area = basis.lattice.area_omega
    coeffs = np.zeros((2, n_g, 4), dtype=complex)
    coeffs[0, :, 0] = v[:n_g]          # band 0: sublattice A, layers 1/2
    coeffs[0, :, 1] = v[n_g:]
    coeffs[1] = q_fiber_action(coeffs[0])
    return np.sqrt(area)*coeffs


@dataclass(frozen=True)
class BlochBundle:
    """Flat-band coefficients on the whole grid, chiral gauge.

    coeffs[x] has shape (2, n_G, 4), normalized to sum_G ||uhat||^2 = |Omega|
    and assembled at grid.centered_points[x].  residuals[x] is
    sigma_min(D_k(alpha)) there.
    """

    grid: KGrid
    basis: PlaneWaveBasis
    alpha: float
    coeffs: np.ndarray
    residuals: np.ndarray
    gauge: str = "chiral"

    @property
    def lattice(self) -> MoireLattice:
        return self.grid.lattice

    @property
    def n_bands(self) -> int:
        return self.coeffs.shape[1]

    def unit_coeffs(self, k_idx: int) -> np.ndarray:
        """Coefficients rescaled to unit vectors (plain eigenvector norm)."""
        return self.coeffs[k_idx]/np.sqrt(self.lattice.area_omega)

    def orthonormality_error(self) -> float:
        c = self.coeffs.reshape(self.grid.n_k, self.n_bands, -1)
        grams = np.einsum("xmi,xni->xmn", c.conj(), c)/self.lattice.area_omega
        return float(np.abs(grams - np.eye(self.n_bands)).max())

    def projector(self, k_idx: int) -> np.ndarray:
        """Orthogonal projector onto the flat-band space at k, in the
        plane-wave coefficient basis (dimension 4 n_G)."""
        c = self.unit_coeffs(k_idx).reshape(self.n_bands, -1)
        return c.conj().T @ c

    def projector_distance(self, i: int, j: int) -> float:
        """Operator norm ||Pi(k_i) - Pi(k_j)|| via principal angles."""
        ci = self.unit_coeffs(i).reshape(self.n_bands, -1)
        cj = self.unit_coeffs(j).reshape(self.n_bands, -1)
        sv = np.linalg.svd(ci.conj() @ cj.T, compute_uv=False)
        cos2 = min(float(sv.min()), 1.0)**2
        return float(np.sqrt(max(1.0 - cos2, 0.0)))


def build_bundle(grid: KGrid, alpha: float, basis: PlaneWaveBasis,
                 residual_tol: float = 1e-6, threads: int = 0) -> BlochBundle:
    """Solve every grid momentum and collect gauge-fixed flat-band vectors."""
    n_k = grid.n_k
    coeffs = np.zeros((n_k, 2, basis.n_g, 4), dtype=complex)
    residuals = np.zeros(n_k)

    def solve(x: int):
        k = grid.centered_points[x]
        coeffs[x] = flat_band_states(k, alpha, basis, residual_tol=residual_tol)
        dmat = assemble_d(k, alpha, basis).matrix
        residuals[x] = np.linalg.svd(dmat, compute_uv=False)[-1]

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(solve, range(n_k)))
    else:
        for x in range(n_k):
            solve(x)
    return BlochBundle(grid=grid, basis=basis, alpha=float(alpha),
                       coeffs=coeffs, residuals=residuals)


@dataclass(frozen=True)
class ConnectivityReport:
    """Connectivity of the grid under ||Pi(k) - Pi(k')|| < 1 edges."""

    n_k: int
    distance: np.ndarray
    components: list
    paths: dict = field(repr=False)
    max_nn_distance: float

    @property
    def connected(self) -> bool:
        return len(self.components) == 1

    def witness_path(self, i: int, j: int) -> list[int] | None:
        return self.paths.get((i, j))


def check_grid_assumption(bundle: BlochBundle) -> ConnectivityReport:
    """Build the projector-distance graph and report its components.

    Edges join pairs with operator-norm distance strictly below 1; witness
    paths come from breadth-first search with lexicographic tie-breaking.
    Disconnection is reported, not raised.
    """
    grid = bundle.grid
    n = grid.n_k
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = bundle.projector_distance(i, j)
    adj = [[j for j in range(n) if j != i and dist[i, j] < 1.0] for i in range(n)]

    paths = {}
    seen_global = set()
    components = []
    for src in range(n):
        # BFS from every node for witness paths; components from src sweep
        parent = {src: None}
        order = [src]
        head = 0
        while head < len(order):
            cur = order[head]
            head += 1
            for nxt in adj[cur]:
                if nxt not in parent:
                    parent[nxt] = cur
                    order.append(nxt)
        for dst in order:
            node, chain = dst, []
            while node is not None:
                chain.append(node)
                node = parent[node]
            paths[(src, dst)] = chain[::-1]
        if src not in seen_global:
            comp = sorted(order)
            components.append(comp)
            seen_global.update(comp)

    nn = []
    for x in range(n):
        i, j = grid.ij[x]
        for di, dj in ((1, 0), (0, 1)):
            y = grid.index(i + di, j + dj)
            if y != x:
                nn.append(dist[x, y])
    return ConnectivityReport(n_k=n, distance=dist, components=components,
                              paths=paths, max_nn_distance=float(max(nn)) if nn else 0.0)


@dataclass(frozen=True)
class RGrid:
    """Uniform real-space sample of the unit cell, closed under inversion.

    Fractions (i + 1/2)/n avoid the high-symmetry points where theta ratios
    hit 0/0; inversion_index[p] is the sample at -r_p modulo the lattice.
    """

    lattice: MoireLattice
    n: int
    points: np.ndarray
    inversion_index: np.ndarray

    @property
    def weight(self) -> float:
        """Quadrature weight: cell area / number of samples."""
        return self.lattice.area_omega/len(self.points)


def make_rgrid(lattice: MoireLattice, n: int = 24) -> RGrid:
    frac = (np.arange(n) + 0.5)/n
    f1, f2 = np.meshgrid(frac, frac, indexing="ij")
    pts = f1.ravel()[:, None]*lattice.a1 + f2.ravel()[:, None]*lattice.a2
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    inv = ((n - 1 - ii)*n + (n - 1 - jj)).ravel()
    return RGrid(lattice=lattice, n=n, points=pts, inversion_index=inv)


def evaluate_state(basis: PlaneWaveBasis, coeffs: np.ndarray, r) -> np.ndarray:
    """Sample periodic-frame amplitudes at positions r.

    coeffs: (..., n_G, 4), normalized per the bundle convention.  Returns
    (..., n_pts, 4).  The Bloch phase e^{ik.r} is intentionally omitted: all
    consumers (pair products, norms, overlaps of same-k states) are
    insensitive to it, and kernel vectors of D(alpha) + w(k) at different k
    live in one fixed function space.
    """
    r = np.atleast_2d(np.asarray(r, dtype=float))
    q0 = basis.lattice.q_vectors[0]
    ph1 = np.exp(1j*(r @ (basis.shells.vectors + q0).T))   # (n_pts, n_G)
    ph2 = np.exp(1j*(r @ (basis.shells.vectors - q0).T))
    c = coeffs/np.sqrt(basis.lattice.area_omega)
    out = np.empty(c.shape[:-2] + (r.shape[0], 4), dtype=complex)
    out[..., 0] = np.einsum("...g,pg->...p", c[..., 0], ph1)
    out[..., 1] = np.einsum("...g,pg->...p", c[..., 1], ph2)
    out[..., 2] = np.einsum("...g,pg->...p", c[..., 2], ph1)
    out[..., 3] = np.einsum("...g,pg->...p", c[..., 3], ph2)
    return out


def zero_location(k) -> np.ndarray:
    """Predicted real-space zero of the band-0 amplitude at momentum k."""
    k = np.asarray(k, dtype=float)
    return 4*np.pi/(3*np.sqrt(3))*np.array([k[1], -k[0]])


def theta_oracle(bundle: BlochBundle, k_idx: int, rgrid: RGrid) -> np.ndarray:
    """Analytic flat-band amplitudes F_k(r) u_0(r) sampled on rgrid.

    u_0 is the numerically computed band-0 state at the Gamma point of the
    grid; F_k is the ratio of odd theta functions carrying the momentum
    boost, with tau = omega.  Output is normalized to cell integral 1 and
    has shape (n_pts, 4) with support on the A components.
    """
    lat = bundle.lattice
    grid = bundle.grid
    gamma_idx = grid.index(0, 0)
    if np.linalg.norm(grid.points[gamma_idx]) > 1e-12:
        raise ValueError("bundle grid does not contain the zone origin")
    k = grid.centered_points[k_idx]
    u0 = evaluate_state(bundle.basis, bundle.coeffs[gamma_idx, 0], rgrid.points)

    omega = lat.omega_phase
    kc = k[0] + 1j*k[1]
    x, y = rgrid.points[:, 0], rgrid.points[:, 1]
    zeta = 3*(x + 1j*y)/(4*np.pi*1j*omega)
    kappa = kc/(np.sqrt(3)*omega)
    prefactor = np.exp(kc/2*(-1j*(1 + omega)*x + (omega - 1)*y))
    fk = prefactor*theta1(np.pi*(zeta + kappa), omega)/theta1(np.pi*zeta, omega)

    vals = fk[:, None]*u0
    norm = np.sqrt(np.sum(np.abs(vals)**2)*rgrid.weight)
    return vals/norm
