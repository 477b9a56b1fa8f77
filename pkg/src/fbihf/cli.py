"""Command-line interface: reproducible pipelines over the library modules.

Subcommands write deterministic JSON (and CSV) reports into the output
directory and exit nonzero on failed validation: 1 for configuration
problems, 2 for cache corruption, 3 for failed physics validations.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import classify as cls
from . import fock
from . import propagation as prop
from . import sylvester as syl
from .chiral import assemble_d, assemble_h
from .config import ConfigError, RunConfig, apply_env_overrides, load_config
from .errors import CacheError, DimensionCapError
from .flatband import check_grid_assumption, make_rgrid
from .formfactor import (dagger_identity_residual, pair_product,
                         pair_product_direct, parseval_gap,
                         shell_tail_profile, shift_invariance_residual,
                         sum_rule_check)
from .hartree_fock import (EnergyWorkspace, build_fm_state,
                           energy_commutator_form, energy_trace_form,
                           gs_condition_residuals, random_half_filled_projector)
from .pipeline import Workspace, prepare
from .reports import write_csv, write_report

RESIDUAL_GATE = 1e-4


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def run_magic_alpha(ws: Workspace) -> tuple[bool, dict]:
    grid, basis = ws.grid, ws.basis
    per_k = [float(np.linalg.svd(assemble_d(grid.centered_points[x], ws.alpha,
                                            basis).matrix, compute_uv=False)[-1])
             for x in range(grid.n_k)]
    ok = max(per_k) < 1e-6
    return ok, {
        "alpha_star": ws.alpha,
        "search_residual": ws.alpha_residual,
        "grid_residuals": per_k,
        "max_grid_residual": max(per_k),
        "pass": ok,
    }


def run_bands(ws: Workspace) -> tuple[bool, dict]:
    grid, basis = ws.grid, ws.basis
    rows = []
    flat_widths = []
    for x in range(grid.n_k):
        k = grid.centered_points[x]
        eigs = np.linalg.eigvalsh(assemble_h(k, ws.alpha, basis))
        i, j = grid.ij[x]
        rows.append([int(i), int(j), float(k[0]), float(k[1])] + eigs.tolist())
        mid = len(eigs)//2
        flat_widths.append(float(max(abs(eigs[mid - 1]), abs(eigs[mid]))))
    write_csv(_out(ws.config, "bands.csv"),
              ["i", "j", "kx", "ky"] + [f"e{n}" for n in range(len(rows[0]) - 4)],
              rows)
    ok = max(flat_widths) < 1e-6
    return ok, {"max_flat_band_energy": max(flat_widths), "pass": ok}


def run_formfactors(ws: Workspace, export: str = "none") -> tuple[bool, dict]:
    table = ws.spinless_table
    grid = table.grid
    q0_idx = grid.index(0, 0)
    g0 = table.shells.index_of((0, 0))
    norm_dev = max(float(np.linalg.norm(table.data[k, q0_idx, g0] - np.eye(2)))
                   for k in range(grid.n_k))
    dagger_dev = dagger_identity_residual(table)
    shift_dev = shift_invariance_residual(table, seed=ws.config.seed)
    sum_rule = sum_rule_check(table)
    parseval = max(parseval_gap(table, 0, q) for q in range(min(grid.n_k, 3)))
    tail = shell_tail_profile(table)
    tail_monotone = bool(np.all(np.diff(tail[:, 1]) <= 1e-30))

    rg = make_rgrid(grid.lattice, 8)
    rng = np.random.default_rng(ws.config.seed)
    pp_dev = 0.0
    for _ in range(10):
        ka = int(rng.integers(grid.n_k))
        kb = int(rng.integers(grid.n_k))
        pts = rg.points[rng.integers(len(rg.points), size=3)]
        a = pair_product(table, ka, kb, pts)
        b = pair_product_direct(table, ka, kb, pts)
        pp_dev = max(pp_dev, float(np.abs(a - b).max()))

    if export != "none":
        entries = []
        for k_idx in range(grid.n_k):
            sel = [g0] if export == "diag" else range(table.n_g)
            for g_idx in sel:
                lam = table.data[k_idx, q0_idx, g_idx]
                entries.append({"k": k_idx, "q": q0_idx, "g": int(g_idx),
                                "lambda": lam.tolist()})
        write_report(_out(ws.config, "formfactors_export.json"),
                     {"entries": entries})

    ok = (norm_dev <= 1e-10 and dagger_dev <= 1e-10 and shift_dev <= 1e-10
          and sum_rule <= 1e-8*grid.n_k and pp_dev <= 1e-6
          and parseval <= 1e-6 and tail_monotone and not table.tail_warning)
    return ok, {
        "normalization_residual": norm_dev,
        "dagger_identity_residual": dagger_dev,
        "shift_identity_residual": shift_dev,
        "sum_rule_residual": sum_rule,
        "pair_product_agreement": pp_dev,
        "parseval_gap": parseval,
        "tail_fraction": table.tail_fraction,
        "tail_monotone": tail_monotone,
        "pass": ok,
    }


def run_hf_energy(ws: Workspace, generator: int = 0,
                  n_random: int = 0) -> tuple[bool, dict]:
    table = ws.table
    workspace = EnergyWorkspace(table, ws.interaction)
    state = build_fm_state(table, generator)
    e_tr = energy_trace_form(state, table, ws.interaction, workspace=workspace)
    e_cm = energy_commutator_form(state, table, ws.interaction, workspace=workspace)
    res = gs_condition_residuals(state, table, ws.interaction, workspace=workspace)
    results = {
        "generator": generator,
        "energy_trace_form": e_tr,
        "energy_commutator_form": e_cm,
        "energy_per_momentum": e_tr/table.grid.n_k,
        "form_gap": abs(e_tr - e_cm),
        "trace_residual": res.trace_residual,
        "commutator_residual": res.commutator_residual,
    }
    ok = abs(e_tr - e_cm) <= 1e-10*(1 + abs(e_tr)) and e_cm >= -1e-12
    if n_random:
        rng = np.random.default_rng(ws.config.seed)
        gaps = []
        for _ in range(n_random):
            p = random_half_filled_projector(table, rng)
            a = energy_trace_form(p, table, ws.interaction, workspace=workspace)
            b = energy_commutator_form(p, table, ws.interaction, workspace=workspace)
            gaps.append(abs(a - b)/(1 + abs(a)))
            ok = ok and b >= -1e-12
        results["random_projectors"] = n_random
        results["max_relative_form_gap"] = max(gaps)
        ok = ok and max(gaps) <= 1e-10
    results["pass"] = ok
    return ok, results


def run_check_gs(ws: Workspace) -> tuple[bool, dict]:
    from .flavors import generators
    table = ws.table
    workspace = EnergyWorkspace(table, ws.interaction)
    per_gen = []
    ok = True
    for idx in range(len(generators(table.flavor))):
        state = build_fm_state(table, idx)
        res = gs_condition_residuals(state, table, ws.interaction,
                                     workspace=workspace)
        energy = energy_commutator_form(state, table, ws.interaction,
                                        workspace=workspace)
        unif = prop.uniform_filling_check(state)
        good = (res.trace_residual <= RESIDUAL_GATE
                and res.commutator_residual <= RESIDUAL_GATE
                and energy <= RESIDUAL_GATE and unif <= 1e-6)
        ok = ok and good
        per_gen.append({"generator": idx, "energy": energy,
                        "trace_residual": res.trace_residual,
                        "commutator_residual": res.commutator_residual,
                        "uniform_filling_deviation": unif, "pass": good})
    return ok, {"states": per_gen, "pass": ok}


def run_sylvester(ws: Workspace) -> tuple[bool, dict]:
    table = ws.table
    grid = table.grid
    dims, reports = syl.scan_pairs(table, tol=ws.config.kernel_tol)
    write_csv(_out(ws.config, "sylvester_dims.csv"),
              ["k"] + [str(x) for x in range(grid.n_k)],
              [[a] + dims[a].tolist() for a in range(grid.n_k)])

    results: dict = {"kernel_dims": dims.tolist()}
    ok = True
    if table.flavor == "spinless":
        min_gap = float("inf")
        origin = grid.index(0, 0)
        verdicts = []
        for a in range(grid.n_k):
            for b in range(grid.n_k):
                anti = grid.neg(a)[0] == b
                if a == b:
                    expect = 4 if a == origin else 2
                elif anti:
                    expect = 2
                else:
                    expect = 0
                if dims[a, b] != expect:
                    ok = False
                if a != b and not anti:
                    rep = reports[a*grid.n_k + b]
                    min_gap = min(min_gap, rep.gap)
        for a in range(grid.n_k):
            if a == origin or grid.neg(a)[0] == a:
                continue
            verdict = syl.resolve_antipodal(table, a, tol=ws.config.kernel_tol)
            verdicts.append({"k": a, "forced_zero": verdict.forced_zero,
                             "witness_q": verdict.witness_q_idx})
            ok = ok and verdict.forced_zero
        results["min_offpair_gap"] = min_gap
        results["antipodal_verdicts"] = verdicts
        ok = ok and min_gap > 1e-6
    else:
        expect = 8 if table.flavor == "valley" else 32
        generic = [grid.index(1, 0), grid.index(1, 2 % grid.n_ky)]
        dims_at = [int(dims[a, a]) for a in generic]
        results["generic_diagonal_dims"] = dims_at
        results["expected_diagonal_dim"] = expect
        ok = all(d == expect for d in dims_at)
    results["pass"] = ok
    return ok, results


def run_classify(ws: Workspace, n_samples: int = 20) -> tuple[bool, dict]:
    from .flavors import generators
    table = ws.table
    if table.flavor == "spinless":
        raise ConfigError("classify needs --flavor valley or valley-spin")
    workspace = EnergyWorkspace(table, ws.interaction)
    fm_res = []
    for idx in range(len(generators(table.flavor))):
        res = gs_condition_residuals(build_fm_state(table, idx), table,
                                     ws.interaction, workspace=workspace)
        fm_res.append(max(res.trace_residual, res.commutator_residual))
    gate = max(RESIDUAL_GATE, 10*max(fm_res))

    sweeps = []
    ok = True
    for idx in range(len(generators(table.flavor))):
        sweep = cls.sweep_generator(table, idx, ws.interaction,
                                    n_samples=n_samples, seed=ws.config.seed,
                                    workspace=workspace)
        good = (sweep.max_trace_residual <= gate
                and sweep.max_commutator_residual <= gate
                and sweep.max_chern_residual <= 1e-8
                and (not sweep.singleton or sweep.orbit_diameter <= 1e-12))
        ok = ok and good
        sweeps.append({
            "generator": idx,
            "singleton_orbit": sweep.singleton,
            "orbit_diameter": sweep.orbit_diameter,
            "max_trace_residual": sweep.max_trace_residual,
            "max_commutator_residual": sweep.max_commutator_residual,
            "max_chern_residual": sweep.max_chern_residual,
            "energy_spread": sweep.energy_spread,
            "pass": good,
        })
    kdim = int(syl.solve_pair(table, table.grid.index(1, 0),
                              table.grid.index(1, 0)).kernel_dim)
    expect = 8 if table.flavor == "valley" else 32
    ok = ok and kdim == expect
    return ok, {"fm_residual": max(fm_res), "residual_gate": gate,
                "orbits": sweeps, "kernel_dim_generic": kdim,
                "expected_kernel_dim": expect, "pass": ok}


def run_oracle(ws: Workspace, n_slater: int = 20) -> tuple[bool, dict]:
    table = ws.table
    space = fock.fock_space_for(table)
    if space.dim > fock.DENSE_CAP:
        raise DimensionCapError(
            f"oracle needs a dense solve: dimension {space.dim} exceeds "
            f"{fock.DENSE_CAP}; use a smaller grid or the spinless flavor")
    h = fock.build_h_fbi(space, table, ws.interaction)
    herm = h.hermiticity_error()
    dense = h.toarray()
    eigs = np.linalg.eigvalsh(dense)
    write_csv(_out(ws.config, "oracle_spectrum.csv"), ["n", "energy"],
              [[n, float(e)] for n, e in enumerate(eigs)])

    nop = space.number_operator().toarray()
    w, v = np.linalg.eigh(dense)
    zero_idx = np.where(w <= ws.config.zero_tol)[0]
    half = space.n_modes/2
    filling_dev = max((abs(float((v[:, i].conj() @ nop @ v[:, i]).real) - half)
                       for i in zero_idx), default=0.0)

    workspace = EnergyWorkspace(table, ws.interaction)
    rng = np.random.default_rng(ws.config.seed)
    wick_dev = 0.0
    for _ in range(n_slater):
        x = rng.normal(size=(space.n_modes, space.n_modes//2)) \
            + 1j*rng.normal(size=(space.n_modes, space.n_modes//2))
        q, _ = np.linalg.qr(x)
        psi = fock.slater_vector(space, q)
        e_oracle = float((psi.conj() @ dense @ psi).real)
        from .hartree_fock import DensityMatrix
        p = DensityMatrix(matrix=q @ q.conj().T, flavor=table.flavor,
                          grid=table.grid)
        e_formula = energy_trace_form(p, table, ws.interaction, workspace=workspace)
        wick_dev = max(wick_dev, abs(e_oracle - e_formula)/(1 + abs(e_oracle)))

    fm_vecs = []
    for idx in (0, 1):
        state = build_fm_state(table, idx)
        occ = np.where(np.abs(np.diagonal(state.matrix).real - 1) < 1e-9)[0]
        xi = np.zeros((space.n_modes, len(occ)), dtype=complex)
        xi[occ, np.arange(len(occ))] = 1.0
        fm_vecs.append(fock.slater_vector(space, xi))
    report = fock.ground_space(h, tol=ws.config.zero_tol,
                               hf_vectors=np.column_stack(fm_vecs))
    max_angle = float(report.principal_angles.max()) if report.principal_angles is not None else float("nan")

    ok = (herm <= 1e-12 and eigs[0] >= -1e-10 and filling_dev <= 1e-8
          and wick_dev <= 1e-8)
    return ok, {
        "fock_dim": space.dim,
        "hermiticity": herm,
        "lambda_min": float(eigs[0]),
        "zero_space_dim": int(report.zero_dim),
        "half_filling_deviation": filling_dev,
        "wick_agreement": wick_dev,
        "max_principal_angle_to_fm_span": max_angle,
        "pass": ok,
    }


def run_all(ws: Workspace) -> tuple[bool, dict]:
    from dataclasses import replace
    summary = {}
    ok = True
    steps = [
        ("magic_alpha", lambda: run_magic_alpha(ws)),
        ("formfactors", lambda: run_formfactors(ws)),
        ("hf_energy", lambda: run_hf_energy(ws, n_random=30)),
        ("check_gs", lambda: run_check_gs(ws)),
        ("sylvester", lambda: run_sylvester(ws)),
    ]
    for name, step in steps:
        good, results = step()
        summary[name] = results
        ok = ok and good
        print(f"{'PASS' if good else 'FAIL'}: {name}")

    for flavor in ("valley", "valley-spin"):
        cfg2 = replace(ws.config, flavor=flavor)
        ws2 = prepare(cfg2)
        good, results = run_classify(ws2, n_samples=8)
        summary[f"classify_{flavor}"] = results
        ok = ok and good
        print(f"{'PASS' if good else 'FAIL'}: classify ({flavor})")

    cfg3 = replace(ws.config, n_kx=2, n_ky=1, flavor="spinless")
    ws3 = prepare(cfg3)
    good, results = run_oracle(ws3)
    summary["oracle"] = results
    ok = ok and good
    print(f"{'PASS' if good else 'FAIL'}: oracle (2x1 grid)")

    conn = check_grid_assumption(ws.bundle)
    summary["grid_assumption"] = {
        "connected": conn.connected,
        "max_nn_distance": conn.max_nn_distance,
    }
    ok = ok and conn.connected
    print(f"{'PASS' if conn.connected else 'FAIL'}: grid_assumption")
    summary["pass"] = ok
    return ok, summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbihf",
        description="Flat-band interacting model pipelines for chiral "
                    "twisted bilayer graphene")
    parser.add_argument("--config", default=None, help="config file path")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--cache", default=None, help="cache directory")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--flavor", default=None,
                        choices=["spinless", "valley", "valley-spin"])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("magic-alpha")
    sub.add_parser("bands")
    ff = sub.add_parser("formfactors")
    ff.add_argument("--export", choices=["none", "diag", "full"], default="none")
    he = sub.add_parser("hf-energy")
    he.add_argument("--generator", type=int, default=0)
    he.add_argument("--random", type=int, default=0)
    sub.add_parser("check-gs")
    sub.add_parser("sylvester")
    cl = sub.add_parser("classify")
    cl.add_argument("--samples", type=int, default=20)
    orc = sub.add_parser("oracle")
    orc.add_argument("--slater", type=int, default=20)
    sub.add_parser("all")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.out is not None:
            cfg.out_dir = args.out
        if args.cache is not None:
            cfg.cache_dir = args.cache
        if args.threads is not None:
            cfg.threads = args.threads
        if args.seed is not None:
            cfg.seed = args.seed
        if args.flavor is not None:
            cfg.flavor = args.flavor
        apply_env_overrides(cfg)
        ws = prepare(cfg)

        if args.command == "magic-alpha":
            ok, results = run_magic_alpha(ws)
        elif args.command == "bands":
            ok, results = run_bands(ws)
        elif args.command == "formfactors":
            ok, results = run_formfactors(ws, export=args.export)
        elif args.command == "hf-energy":
            ok, results = run_hf_energy(ws, generator=args.generator,
                                        n_random=args.random)
        elif args.command == "check-gs":
            ok, results = run_check_gs(ws)
        elif args.command == "sylvester":
            ok, results = run_sylvester(ws)
        elif args.command == "classify":
            ok, results = run_classify(ws, n_samples=args.samples)
        elif args.command == "oracle":
            ok, results = run_oracle(ws, n_slater=args.slater)
        else:
            ok, results = run_all(ws)

        name = args.command.replace("-", "_")
        write_report(_out(cfg, f"{name}.json"), results,
                     meta={"command": args.command, "seed": cfg.seed})
        if not ok:
            print(f"{args.command}: validation failed", file=sys.stderr)
            return 3
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CacheError as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return 2
    except DimensionCapError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
