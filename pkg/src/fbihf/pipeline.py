"""Shared build steps turning a RunConfig into lattice, bundle, and tables.

The Bloch bundle and the spinless form-factor table are cached on disk
keyed by the geometry/coupling fields; flavor extensions are cheap and
rebuilt on demand.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .cache import load_cache, save_cache
from .chiral import build_basis
from .config import RunConfig, cache_key_fields
from .flatband import BlochBundle, build_bundle, find_magic_alpha
from .formfactor import FormFactorTable, compute_table, extend_flavor
from .hartree_fock import Interaction
from .lattice import build_kgrid, build_lattice, gshells


@dataclass
class Workspace:
    config: RunConfig
    lattice: object
    grid: object
    basis: object
    alpha: float
    alpha_residual: float
    bundle: BlochBundle
    table: FormFactorTable          # requested flavor
    spinless_table: FormFactorTable
    interaction: Interaction


def resolve_alpha(cfg: RunConfig, basis) -> tuple[float, float]:
    fixed = cfg.alpha_value()
    if fixed is not None:
        return fixed, float("nan")
    result = find_magic_alpha(basis, interval=(cfg.alpha_lo, cfg.alpha_hi),
                              tol=cfg.alpha_tol)
    return result.alpha_star, result.residual


def _cache_path(cfg: RunConfig, kind: str, fields: dict) -> str:
    from .cache import key_hash
    tag = key_hash(fields).hex()[:12]
    return os.path.join(cfg.cache_dir, f"{kind}-{tag}.fbi")


def _bundle_from_cache(cfg: RunConfig, grid, basis, alpha: float) -> BlochBundle | None:
    fields = cache_key_fields(cfg, alpha)
    data = load_cache(_cache_path(cfg, "bundle", fields), fields)
    if data is None:
        return None
    return BlochBundle(grid=grid, basis=basis, alpha=float(data["alpha"][0]),
                       coeffs=data["coeffs"], residuals=data["residuals"])


def _bundle_to_cache(cfg: RunConfig, bundle: BlochBundle) -> None:
    fields = cache_key_fields(cfg, bundle.alpha)
    save_cache(_cache_path(cfg, "bundle", fields), fields,
               {"coeffs": bundle.coeffs, "residuals": bundle.residuals,
                "alpha": np.array([bundle.alpha])})


def _table_from_cache(cfg: RunConfig, bundle: BlochBundle) -> FormFactorTable | None:
    from .lattice import GShells
    fields = cache_key_fields(cfg, bundle.alpha)
    data = load_cache(_cache_path(cfg, "table", fields), fields)
    if data is None:
        return None
    coords = data["shell_coords"]
    shells = GShells(coords=coords,
                     vectors=coords @ np.array([bundle.lattice.g1, bundle.lattice.g2]),
                     radius=float(data["radius"][0]))
    return FormFactorTable(bundle=bundle, shells=shells, flavor="spinless",
                           data=data["table"],
                           tail_fraction=float(data["tail"][0]),
                           tail_warning=bool(data["tail"][0] > 1e-8))


def _table_to_cache(cfg: RunConfig, table: FormFactorTable) -> None:
    fields = cache_key_fields(cfg, table.bundle.alpha)
    save_cache(_cache_path(cfg, "table", fields), fields,
               {"table": table.data, "shell_coords": table.shells.coords,
                "radius": np.array([table.shells.radius]),
                "tail": np.array([table.tail_fraction])})


def prepare(cfg: RunConfig, use_cache: bool = True) -> Workspace:
    lattice = build_lattice(cfg.convention)
    grid = build_kgrid(lattice, cfg.n_kx, cfg.n_ky)
    gnorm = float(np.linalg.norm(lattice.g1))
    basis = build_basis(lattice, cfg.pw_shells*gnorm)
    alpha, residual = resolve_alpha(cfg, basis)

    bundle = _bundle_from_cache(cfg, grid, basis, alpha) if use_cache else None
    if bundle is None:
        bundle = build_bundle(grid, alpha, basis, residual_tol=cfg.flat_tol,
                              threads=cfg.threads)
        if use_cache:
            _bundle_to_cache(cfg, bundle)

    table = _table_from_cache(cfg, bundle) if use_cache else None
    if table is None:
        table = compute_table(bundle, cutoff=cfg.ff_shells_resolved*gnorm)
        if use_cache:
            _table_to_cache(cfg, table)

    flavored = table if cfg.flavor_id == "spinless" else extend_flavor(table, cfg.flavor_id)
    interaction = Interaction(family=cfg.interaction, kappa=cfg.kappa,
                              sigma=cfg.sigma)
    return Workspace(config=cfg, lattice=lattice, grid=grid, basis=basis,
                     alpha=alpha, alpha_residual=residual, bundle=bundle,
                     table=flavored, spinless_table=table, interaction=interaction)
