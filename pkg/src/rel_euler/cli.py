"""Command-line front end: ``rel-euler <subcommand> [flags]``.

Exit codes: 0 when every selected check passes, 1 when a check fails,
2 for configuration errors.  Each subcommand writes ``<subcommand>.json``
into the output directory; reports are deterministic for a fixed config.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SUBCOMMANDS = ("simulate", "jet-verify", "verify-identities", "norms", "geometry", "duhamel", "probe")

# defaults follow the acceptance thresholds
DEFAULT_TOLERANCES = {
    "jet_order1": 1e-9,
    "jet_order2": 1e-9,
    "jet_order3": 1e-8,
    "jet_order4": 1e-7,
    "control_median": 1e-3,
    "grid_identity": 1e-6,
    "constraint": 1e-9,
    "minors": 1e-12,
    "elliptic_l2": 1e-8,
    "duhamel_constant": 1e-12,
    "duhamel_order": 1.5,
    "frame": 1e-9,
    "hamiltonian": 1e-8,
    "lp_reconstruction": 1e-11,
    "parseval": 1e-10,
    "probe_stability": 0.2,
    "gronwall_stability": 0.1,
}

DEFAULT_CONFIG = {
    "output_dir": "rel_euler_out",
    "seed": 0,
    "variant": "corrected",
    "run": {"dim": 1, "n": 64, "t_max": 1.0, "cfl": 0.5, "vartheta": 2.0, "snapshot_every": 10},
    "initial": {"kind": "acoustic", "rho0": 0.25, "amplitude": 1e-3, "k": 1, "kmax": 2},
    "jet": {"order": 2, "count": 100, "amplitude": 0.1, "rho0": 0.25, "control": False},
    "grid_identities": {"dim": 2, "n": 16, "amplitude": 0.05},
    "norms": {"s": 2.5, "s0": 2.25, "s_star": 2.25, "h_ref": "background"},
    "geometry": {"trace_steps": 1000, "trace_length": 2.0, "frame_perturbation": 0.05,
                 "duhamel_nt": [20, 40, 80], "duhamel_T": 1.0, "duhamel_n": 32, "box_n": 8,
                 "minor_samples": 10000},
    "probe": {"kinds": ["kato_ponce_commutator", "lp_product"], "count": 200, "n": 128, "dim": 2, "band": 12},
    "tolerances": DEFAULT_TOLERANCES,
}


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def load_schema() -> dict:
    return json.loads(resources.files("rel_euler").joinpath("config_schema.json").read_text())


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        lines = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("config failed schema validation:\n  " + "\n  ".join(lines))


def load_config(path: str | None) -> dict:
    doc = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    validate_config(doc)
    return _merge(DEFAULT_CONFIG, doc)


def _apply_flags(cfg: dict, args) -> dict:
    if args.output_dir is not None:
        cfg["output_dir"] = args.output_dir
    if args.seed is not None:
        cfg["seed"] = args.seed
    run = cfg["run"]
    if args.resolution is not None:
        run["n"] = args.resolution
        cfg["grid_identities"]["n"] = args.resolution
        cfg["probe"]["n"] = args.resolution
    if args.vartheta is not None:
        run["vartheta"] = args.vartheta
    if args.tmax is not None:
        run["t_max"] = args.tmax
    if args.cfl is not None:
        run["cfl"] = args.cfl
    if args.order is not None:
        cfg["jet"]["order"] = args.order
    if args.count is not None:
        cfg["jet"]["count"] = args.count
        cfg["probe"]["count"] = args.count
    if getattr(args, "amplitude", None) is not None:
        cfg["jet"]["amplitude"] = args.amplitude
    if getattr(args, "control", False):
        cfg["jet"]["control"] = True
    if args.identities is not None:
        cfg["identities"] = [x.strip() for x in args.identities.split(",") if x.strip()]
    validate_config(cfg)
    return cfg


# ------------------------------------------------------------------ report helpers


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_report(out_dir: Path, name: str, report: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.json"
    path.write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    return path


def _check(anchor: str, value: float, tolerance: float, mode: str = "max", **extra) -> dict:
    ok = value <= tolerance if mode == "max" else value >= tolerance
    return {"anchor": anchor, "value": float(value), "tolerance": float(tolerance), "mode": mode,
            "pass": bool(ok), **extra}


def _summary(name: str, checks: dict) -> None:
    for key, c in checks.items():
        status = "PASS" if c.get("pass", True) else "FAIL"
        val = c.get("value", c.get("max_rel_residual"))
        tol = c.get("tolerance")
        tail = f" (tol {tol:.3g})" if isinstance(tol, float) else ""
        vs = f"{val:.3e}" if isinstance(val, float) else str(val)
        print(f"[{status}] {name}: {key} = {vs}{tail}")


def _all_pass(checks: dict) -> bool:
    return all(c.get("pass", True) for c in checks.values())


# ------------------------------------------------------------------ shared setup


def _grid(cfg):
    from .fields import Grid

    r = cfg["run"]
    return Grid(r.get("dim", 1), r.get("n", 64), r.get("L", 2 * np.pi))


def _initial(cfg, grid):
    from .dynamics import initial_state

    ini = cfg["initial"]
    return initial_state(ini.get("kind", "acoustic"), grid, cfg["run"].get("vartheta", 2.0), ini.get("rho0", 0.25),
                         ini.get("amplitude", 1e-3), ini.get("k", 1), cfg["seed"], ini.get("kmax", 2))


def _run_config(cfg):
    from .dynamics import RunConfig

    r = dict(cfg["run"])
    r["seed"] = cfg["seed"]
    return RunConfig(**r)


def constraint_defects(U, grid, vartheta) -> dict:
    """max |u.u + 1| and max |u_a w^a| for one grid state."""
    from .algebra import ein, max_abs
    from .dynamics import grid_jet

    s = grid_jet(U, grid, vartheta, 1).state()
    return {"normalization": max_abs(ein("a,a->", s.ul, s.u) + 1.0), "u.w": max_abs(ein("a,a->", s.ul, s.w))}


# ------------------------------------------------------------------ subcommands


def cmd_simulate(cfg, args) -> tuple[dict, dict]:
    from .dynamics import simulate
    from .fields import write_snapshot

    conf = _run_config(cfg)
    grid = conf.grid
    U0 = _initial(cfg, grid)
    traj = simulate(U0, conf)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    traj.diagnostics.to_csv(out / "diagnostics.csv")
    tol = cfg["tolerances"]["constraint"]
    worst = {"normalization": 0.0, "u.w": 0.0}
    snaps = []
    for i, (t, U) in enumerate(zip(traj.times, traj.states)):
        d = constraint_defects(U, grid, conf.vartheta)
        worst = {k: max(worst[k], d[k]) for k in worst}
        name = f"snapshot_{i:05d}.bin"
        write_snapshot(out / name, grid, t, {"p": U[0], "u1": U[1], "u2": U[2], "u3": U[3]})
        snaps.append({"file": name, "t": t})
    checks = {
        "completed": {"anchor": "run reached t_max", "value": traj.status, "pass": traj.status == "completed",
                      "message": traj.message},
        "normalization": _check("unit normalization of the four-velocity", worst["normalization"], tol),
        "u.w": _check("orthogonality of u and the modified vorticity", worst["u.w"], tol),
    }
    diag = traj.diagnostics
    report = {"snapshots": snaps, "diagnostics_file": "diagnostics.csv", "steps": len(diag.rows),
              "final_time": traj.times[-1],
              "max_Linf_du": float(np.max(diag.column("Linf_du"))) if diag.rows else 0.0,
              "max_L2_euler_residual": float(np.max(diag.column("L2_euler_residual"))) if diag.rows else 0.0}
    return checks, report


def _identity_list(cfg, default):
    from .identities import ALL_IDENTITIES

    names = cfg.get("identities") or list(default)
    bad = [n for n in names if n not in ALL_IDENTITIES]
    if bad:
        raise ConfigError(f"unknown identities: {', '.join(bad)}; choose from {', '.join(ALL_IDENTITIES)}")
    return names


def cmd_jet_verify(cfg, args) -> tuple[dict, dict]:
    from .identities import JET_IDENTITIES, get_identity
    from .jet import run_jet_suite

    jc = cfg["jet"]
    order = jc["order"]
    default = [n for n in JET_IDENTITIES if get_identity(n).depth <= order]
    names = _identity_list(cfg, default)
    deep = [n for n in names if get_identity(n).depth > order]
    if deep:
        raise ConfigError(f"jet order {order} is too short for: {', '.join(deep)}")
    control = bool(jc.get("control", False))
    tol = args.tolerance if args.tolerance is not None else cfg["tolerances"][f"jet_order{order}"]
    res = run_jet_suite(names, order, jc["count"], jc["amplitude"], cfg["seed"], cfg["run"]["vartheta"],
                        jc["rho0"], tol, control=control, variant=cfg["variant"])
    checks = {}
    for n, r in res.items():
        if control:
            ctol = args.tolerance if args.tolerance is not None else cfg["tolerances"]["control_median"]
            r = dict(r, value=r["median_rel_residual"], tolerance=ctol, mode="min",
                     **{"pass": r["median_rel_residual"] >= ctol})
        else:
            r = dict(r, value=r["max_rel_residual"])
        checks[n] = r
    return checks, {"jet_order": order, "count": jc["count"], "amplitude": jc["amplitude"], "control": control}


GRID_IDENTITIES = ("WTe-h", "WTe-u", "CEQ", "CEQ0", "CEQ1", "SDe", "HDe", "OE00", "cr04", "cra0", "cra1",
                   "OEe", "c2", "d5")


def cmd_verify_identities(cfg, args) -> tuple[dict, dict]:
    from .dynamics import grid_jet, smooth_random_state
    from .fields import Grid
    from .identities import get_identity, residual

    names = _identity_list(cfg, GRID_IDENTITIES)
    idents = [get_identity(n, cfg["variant"]) for n in names]
    unsupported = [i.name for i in idents if i.requires not in ("solution", "normalized")]
    if unsupported:
        raise ConfigError(f"grid check supports solution identities only, not: {', '.join(unsupported)}")
    gc = cfg["grid_identities"]
    grid = Grid(gc["dim"], gc["n"])
    th = cfg["run"]["vartheta"]
    U = smooth_random_state(grid, cfg["seed"], gc["amplitude"], cfg["initial"]["rho0"], th, kmax=1)
    order = max(i.depth for i in idents)
    state = grid_jet(U, grid, th, order).state()
    tol = args.tolerance if args.tolerance is not None else cfg["tolerances"]["grid_identity"]
    checks = {}
    for ident in idents:
        r = residual(ident, state)
        checks[ident.name] = {"anchor": ident.anchor, "max_rel_residual": r.max_rel, "l2_rel_residual": r.l2_rel,
                              "n_points": r.n_points, "jet_order": order, "value": r.max_rel,
                              "tolerance": tol, "pass": bool(r.max_rel <= tol)}
    return checks, {"grid": {"dim": grid.dim, "n": grid.n}, "time_order": order}


def cmd_norms(cfg, args) -> tuple[dict, dict]:
    from . import eos
    from .analysis import (EnergyParams, energy_functionals, gronwall_diagnostic, partition_defect,
                           sobolev_norm, write_energy_csv)
    from .dynamics import simulate
    from .fields import Grid

    conf = _run_config(cfg)
    grid = conf.grid
    U0 = _initial(cfg, grid)
    nc = cfg["norms"]
    h_ref = nc["h_ref"]
    if h_ref == "background":
        h_ref = float(eos.from_density(cfg["initial"]["rho0"], conf.vartheta).h)
    elif isinstance(h_ref, str):
        raise ConfigError("norms.h_ref must be a number or 'background'")
    prm = EnergyParams(nc["s"], nc["s0"], nc["s_star"], float(h_ref))
    traj = simulate(U0, conf, diagnostics=False)
    recs = energy_functionals(traj.times, traj.states, grid, conf.vartheta, prm)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_energy_csv(out / "energies.csv", recs)
    tol = cfg["tolerances"]
    g1 = Grid(1, 64)
    x = g1.coords()[0].reshape(g1.shape)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        parseval = abs(float(sobolev_norm(np.sin(x), 2.0, g1, homogeneous=True)) - math.sqrt(math.pi))
    checks = {
        "lp_partition": _check("dyadic partition of unity", partition_defect(grid), tol["lp_reconstruction"]),
        "parseval": _check("single-frequency Sobolev norm equals sqrt(pi)", parseval, tol["parseval"]),
        "completed": {"anchor": "run reached t_max", "value": traj.status, "pass": traj.status == "completed"},
    }
    report = {"energies_file": "energies.csv", "records": len(recs), "h_ref": prm.h_ref}
    if len(recs) >= 2:
        gr = gronwall_diagnostic(recs)
        checks["gronwall"] = {"anchor": "Gronwall constant of the energy estimate", "value": gr.K,
                              "pass": bool(gr.bounded), "skipped": gr.skipped, "note": gr.note}
    return checks, report


def _state_metric(cfg):
    from .dynamics import primitive_from_U
    from .geometry import metric_from_state

    conf = _run_config(cfg)
    grid = conf.grid
    U = _initial(cfg, grid)
    h, u = primitive_from_U(U, conf.vartheta)
    return grid, metric_from_state(h, u, conf.vartheta)


def _geometry_frame(cfg, grid, M) -> dict:
    from .geometry import null_frame

    tol = cfg["tolerances"]["frame"]
    eps = cfg["geometry"]["frame_perturbation"]
    coords = grid.mesh()
    dphi = [eps * np.sin(coords[0]), eps * np.cos(coords[0] + coords[1])]
    checks = {}
    g0 = M.g_up[(...,) + (0, 0, 0)]
    for label, g, dp in (("constant", g0, (0.0, 0.0)), ("perturbed", M.g_up, dphi)):
        fr = null_frame(g, dp)
        g_dn = np.linalg.inv(g) if g.ndim == 2 else M.g_dn
        worst = max(fr.relations(g_dn).values())
        checks[f"frame_{label}"] = _check("null frame relations", worst, tol)
    return checks


def _geometry_trace(cfg, grid, M, out: Path) -> dict:
    from .geometry import SpectralMetric, null_geodesic_trace, project_null

    gc = cfg["geometry"]
    metric = SpectralMetric(M.g_up, grid)
    x0 = np.zeros(4)
    xi0 = project_null(metric, x0, np.array([-1.0, 1.0, 0.3, 0.0]))
    tr = null_geodesic_trace(metric, x0, xi0, gc["trace_length"], gc["trace_steps"])
    with open(out / "trace.csv", "w") as fh:
        fh.write("s,t,x1,x2,x3,xi0,xi1,xi2,xi3,H\n")
        for s, x, xi, H in zip(tr.s, tr.x, tr.xi, tr.hamiltonian):
            fh.write(",".join(repr(float(v)) for v in (s, *x, *xi, H)) + "\n")
    drift = float(np.max(np.abs(2.0 * tr.hamiltonian)))
    return {"hamiltonian": _check("conservation of g(xi, xi) along null geodesics", drift,
                                  cfg["tolerances"]["hamiltonian"], file="trace.csv")}


def _geometry_duhamel(cfg, grid, M) -> dict:
    from .geometry import duhamel_check

    gc = cfg["geometry"]
    x = grid.mesh()[0]
    F = lambda t: np.sin(x) * np.cos(t) + 0.3 * np.cos(2 * x)  # noqa: E731
    res = [duhamel_check(M.g_up, grid, F, gc["duhamel_T"], nt) for nt in gc["duhamel_nt"]]
    r = [d["residual"] for d in res]
    mono = all(b < a for a, b in zip(r, r[1:]))
    return {"duhamel_state_metric": {"anchor": "modified Duhamel formula", "value": r[-1], "residuals": r,
                                     "nt": gc["duhamel_nt"], "pass": bool(mono)}}


def _geometry_elliptic(cfg) -> dict:
    from .geometry import EllipticOperatorP, SpaceTimeBox, band_limited, elliptic_split, minors, spacetime_velocity

    gc = cfg["geometry"]
    tol = cfg["tolerances"]
    rng = np.random.default_rng(cfg["seed"])
    q = rng.normal(size=(gc["minor_samples"], 3))
    q *= (3.0 * rng.uniform(size=(gc["minor_samples"], 1)) ** (1 / 3)) / np.linalg.norm(q, axis=1, keepdims=True)
    u = np.concatenate([np.sqrt(1 + np.sum(q**2, axis=1, keepdims=True)), q], axis=1).T
    pmin = float(np.min(minors(u)))
    n = gc["box_n"]
    box = SpaceTimeBox((n, n, n, n), (2 * np.pi,) * 4)
    uu = spacetime_velocity(box, cfg["seed"])
    op = EllipticOperatorP(uu, box)
    v_true = band_limited(box, rng, 2)
    v, rep = op.solve(op.apply(v_true))
    err = math.sqrt(np.sum((v - v_true) ** 2) * box.cell_volume)
    rhs = band_limited(box, rng, 2)
    um, up, reports = elliptic_split(uu, np.stack([rhs] * 4), box)
    return {
        "minors": _check("principal minors of the elliptic symbol", 1.0 - pmin, tol["minors"], minimum=pmin),
        "manufactured": _check("manufactured solution of the elliptic operator", err, tol["elliptic_l2"],
                               iterations=rep["iterations"]),
        "split": {"anchor": "split of u into u_minus and u_plus", "value": max(r["residual"] for r in reports),
                  "pass": True},
    }


def cmd_geometry(cfg, args) -> tuple[dict, dict]:
    chosen = [k for k in ("trace", "frame_check", "duhamel", "elliptic_split") if getattr(args, k)]
    if not chosen:
        chosen = ["trace", "frame_check", "duhamel", "elliptic_split"]
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    grid, M = _state_metric(cfg)
    checks = {}
    if "frame_check" in chosen:
        checks.update(_geometry_frame(cfg, grid, M))
    if "trace" in chosen:
        checks.update(_geometry_trace(cfg, grid, M, out))
    if "duhamel" in chosen:
        from .fields import Grid
        from .geometry import metric_from_state
        from .dynamics import primitive_from_U

        g1 = Grid(1, cfg["geometry"]["duhamel_n"])
        U = _initial(_merge(cfg, {"run": {"dim": 1, "n": g1.n}}), g1)
        h, u = primitive_from_U(U, cfg["run"]["vartheta"])
        checks.update(_geometry_duhamel(cfg, g1, metric_from_state(h, u, cfg["run"]["vartheta"])))
    if "elliptic_split" in chosen:
        checks.update(_geometry_elliptic(cfg))
    return checks, {"selected": chosen}


def duhamel_study(nts, n: int = 32, T: float = 1.0, seed: int = 0) -> dict:
    """Flat, shifted-variable and constant-forcing Duhamel residuals."""
    from . import eos
    from .fields import Grid
    from .geometry import duhamel_check, metric_from_state, rest_metric

    grid = Grid(1, n)
    x = grid.mesh()[0]
    F = lambda t: np.sin(x) * np.cos(t) + 0.3 * np.cos(2 * x)  # noqa: E731
    flat = rest_metric(0.5).g_up
    rho = 0.25 * (1 + 0.05 * np.sin(x))
    ui = 0.2 + 0.05 * np.cos(x)
    u = np.stack([np.sqrt(1 + ui**2), ui, 0 * x, 0 * x])
    var = metric_from_state(eos.enthalpy(rho, 2.0), u, 2.0).g_up
    flat_r = [duhamel_check(flat, grid, F, T, nt)["residual"] for nt in nts]
    var_r = [duhamel_check(var, grid, F, T, nt)["residual"] for nt in nts]
    const = duhamel_check(flat, grid, lambda t: np.ones(grid.shape), T, nts[0])["residual"]
    orders = [math.log(a / b) / math.log(m / k) for a, b, k, m in zip(flat_r, flat_r[1:], nts, nts[1:])]
    return {"nt": list(nts), "flat": flat_r, "flat_orders": orders, "variable": var_r, "constant": const}


def cmd_duhamel(cfg, args) -> tuple[dict, dict]:
    gc = cfg["geometry"]
    tol = cfg["tolerances"]
    st = duhamel_study(gc["duhamel_nt"], gc["duhamel_n"], gc["duhamel_T"], cfg["seed"])
    mono = all(b < a for a, b in zip(st["variable"], st["variable"][1:]))
    checks = {
        "flat_order": _check("flat-metric Duhamel convergence order", min(st["flat_orders"]),
                             tol["duhamel_order"], mode="min"),
        "variable_monotone": {"anchor": "variable-metric Duhamel residual under refinement",
                              "value": st["variable"][-1], "pass": bool(mono)},
        "constant": _check("constant forcing Duhamel residual", st["constant"], tol["duhamel_constant"]),
    }
    return checks, st


def probe_study(kinds, count: int, n: int, dim: int, band: int, seed: int) -> dict:
    from .analysis import inequality_probe

    out = {}
    for kind in kinds:
        a = inequality_probe(kind, seed, count, n=n, dim=dim, band=band)
        b = inequality_probe(kind, seed, count, n=2 * n, dim=dim, band=band)
        out[kind] = {"ratio_n": a, "ratio_2n": b, "relative_change": abs(b - a) / a if a > 0 else 0.0}
    return out


def cmd_probe(cfg, args) -> tuple[dict, dict]:
    pc = cfg["probe"]
    tol = args.tolerance if args.tolerance is not None else cfg["tolerances"]["probe_stability"]
    st = probe_study(pc["kinds"], pc["count"], pc["n"], pc["dim"], pc["band"], cfg["seed"])
    anchors = {"kato_ponce_commutator": "commutator estimate for fractional derivatives",
               "lp_product": "Besov-Sobolev product estimate"}
    checks = {k: _check(anchors[k], v["relative_change"], tol, ratio_n=v["ratio_n"], ratio_2n=v["ratio_2n"])
              for k, v in st.items()}
    return checks, {"n": pc["n"], "count": pc["count"]}


COMMANDS = {
    "simulate": cmd_simulate,
    "jet-verify": cmd_jet_verify,
    "verify-identities": cmd_verify_identities,
    "norms": cmd_norms,
    "geometry": cmd_geometry,
    "duhamel": cmd_duhamel,
    "probe": cmd_probe,
}


# ------------------------------------------------------------------ argparse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--output-dir", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--order", type=int, choices=range(1, 5))
    common.add_argument("--count", type=int)
    common.add_argument("--identities", metavar="LIST")
    common.add_argument("--tolerance", type=float)
    common.add_argument("--resolution", type=int)
    common.add_argument("--vartheta", type=float)
    common.add_argument("--tmax", type=float)
    common.add_argument("--cfl", type=float)

    parser = argparse.ArgumentParser(prog="rel-euler", description="Relativistic Euler verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "jet-verify":
            p.add_argument("--amplitude", type=float)
            p.add_argument("--control", action="store_true", help="negative control on non-solution jets")
        if name == "geometry":
            p.add_argument("--trace", action="store_true")
            p.add_argument("--frame-check", action="store_true")
            p.add_argument("--duhamel", action="store_true")
            p.add_argument("--elliptic-split", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _apply_flags(load_config(args.config), args)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        checks, extra = COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError, TypeError) as exc:
        # model-level ValueErrors here come from invalid parameter combinations
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ok = _all_pass(checks)
    report = {"command": args.command, "config": cfg, "checks": checks, "result": extra,
              "status": "pass" if ok else "fail"}
    path = write_report(Path(cfg["output_dir"]), args.command, report)
    _summary(args.command, checks)
    print(f"report: {path}")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
