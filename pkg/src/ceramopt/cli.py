"""Command-line driver: ``ceramopt <command> --config run.json [flags]``.

Exit codes: 0 success / PASS, 1 verdict FAIL, 2 configuration error,
3 geometry error, 4 solver error, 5 optimizer could not find an admissible
step. Flags override the matching config entries.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import jsonio
from .config import RunConfig, load_config
from .elasticity import (assemble_stiffness, compute_stress, energy_residual, solve_state,
                         write_triplets)
from .errors import (CeramoptError, ConfigError, GeometryError, NoAdmissibleStep,
                     SolverError, UnsupportedMeasure)
from .fracture import hazard_convexity_check
from .geometry import Mesh, volume, write_mesh
from .ppp_mc import estimate_survival
from .reliability import build_quadrature, convergence_table, objective
from .shapeopt import Pipeline, optimize

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_GEOMETRY, EXIT_SOLVER, EXIT_NO_STEP = 0, 1, 2, 3, 4, 5

# seed offset for the single documented rerun of a failed Monte Carlo check
MC_RERUN_OFFSET = 1_000_003


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_array(path: Path, arr: np.ndarray) -> None:
    rows = np.asarray(arr, float).reshape(len(arr), -1)
    _write(path, "".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in rows.tolist()))


def _state(cfg: RunConfig, mesh: Mesh):
    """Stress field of the run: prescribed for fixtures, otherwise solved."""
    stress = cfg.stress_field(mesh)
    if stress is not None:
        return None, stress
    mat = cfg.require_material()
    u = solve_state(mesh, mat, cfg.load, cfg.dirichlet(mesh))
    return u, compute_stress(mesh, mat, u)


def _uniaxial_check(cfg: RunConfig, stress) -> Optional[dict]:
    """Deviation from ``sigma = t e_x (x) e_x`` when the load is a uniform x-traction."""
    g = cfg.load.g
    if cfg.load.f is not None or g is None or np.ndim(g) != 1 or g[0] == 0 or np.any(g[1:]):
        return None
    t = float(g[0])
    s = stress.tensors
    ref = np.zeros_like(s[0])
    ref[0, 0] = t
    dev = np.abs(s - ref) / abs(t)
    other = dev.copy()
    other[:, 0, 0] = 0.0
    return {"traction": t, "max_rel_dev_sigma_xx": float(dev[:, 0, 0].max()),
            "max_rel_other_components": float(other.max())}


def cmd_solve(cfg: RunConfig, out: Path, args) -> int:
    mesh = cfg.build_mesh()
    mat = cfg.require_material()
    t0 = time.perf_counter()
    u = solve_state(mesh, mat, cfg.load, cfg.dirichlet(mesh))
    stress = compute_stress(mesh, mat, u)
    elapsed = time.perf_counter() - t0
    write_mesh(mesh, out / "mesh.txt")
    _write_array(out / "displacement.txt", u.values)
    _write_array(out / "stress.txt", stress.tensors)
    if args.dump_system:
        write_triplets(assemble_stiffness(mesh, mat), out / "stiffness.txt")
    doc = {
        "run": cfg.echo(),
        "n_nodes": mesh.n_nodes,
        "n_elements": mesh.n_elements,
        "volume": volume(mesh),
        "solver": u.method,
        "iterations": u.iterations,
        "linear_residual": u.residual,
        "energy_residual": energy_residual(mesh, mat, cfg.load, u),
        "max_principal_stress": float(stress.max_principal().max()),
    }
    check = _uniaxial_check(cfg, stress)
    if check is not None:
        doc["uniaxial_check"] = check
    _write(out / "solve.json", jsonio.dumps(doc))
    print(f"solved {mesh.n_nodes} nodes / {mesh.n_elements} elements in {elapsed:.3f} s, "
          f"energy residual {doc['energy_residual']:.3e}")
    if check is not None:
        print(f"max |sigma_xx - t|/t = {check['max_rel_dev_sigma_xx']:.3e}")
    return EXIT_OK


def _reliability(cfg: RunConfig, mesh: Mesh, stress):
    measure = cfg.require_measure()
    quad = build_quadrature(mesh.dim, cfg.quadrature_order)
    return objective(mesh, stress, measure, quad, cfg.k_ic)


def cmd_reliability(cfg: RunConfig, out: Path, args) -> int:
    mesh = cfg.build_mesh()
    _, stress = _state(cfg, mesh)
    res = _reliability(cfg, mesh, stress)
    doc = res.to_dict()
    doc["run"] = cfg.echo()
    _write(out / "reliability.json", jsonio.dumps(doc))
    print(f"J = {res.J:.17g}  p_s = {res.p_s:.17g}")
    if args.sweep:
        table = convergence_table(mesh, stress, cfg.require_measure(), cfg.k_ic, args.sweep)
        lines = ["order,J\n"] + [f"{p},{J:.17g}\n" for p, J in table]
        _write(out / "convergence.csv", "".join(lines))
        print("order  J")
        for p, J in table:
            print(f"{p:5d}  {J:.17g}")
    return EXIT_OK


def cmd_mc_validate(cfg: RunConfig, out: Path, args) -> int:
    mesh = cfg.build_mesh()
    _, stress = _state(cfg, mesh)
    res = _reliability(cfg, mesh, stress)
    measure = cfg.require_measure()

    def run(seed):
        return estimate_survival(mesh, stress, measure, cfg.n_trials, seed, cfg.safety,
                                 cfg.k_ic, threads=args.threads)

    est = run(cfg.seed)
    passed = est.agrees_with(res.p_s)
    rerun = None
    if not passed:
        # one rerun with a fresh, documented seed before declaring failure
        rerun = run(cfg.seed + MC_RERUN_OFFSET)
        passed = rerun.agrees_with(res.p_s)
    verdict = "PASS" if passed else "FAIL"
    doc = {
        "run": cfg.echo(),
        "verdict": verdict,
        "criterion": "|p_hat - p_s| <= 3 std_err",
        "safety": cfg.safety,
        "mc": est.to_dict(),
        "mc_rerun": None if rerun is None else rerun.to_dict(),
        "reliability": res.to_dict(),
    }
    _write(out / "mc_validate.json", jsonio.dumps(doc))
    final = rerun or est
    print(f"p_s (closed form) = {res.p_s:.10f}")
    print(f"p_hat (MC)        = {final.p_hat:.10f} +/- {final.std_err:.3g} "
          f"(n = {final.n_trials}, seed = {final.seed})")
    print(verdict)
    return EXIT_OK if passed else EXIT_FAIL


def _svg_plot(ys, title: str, ylabel: str) -> str:
    """Small self-contained line plot; deterministic output for identical data."""
    w, h, pad = 480, 320, 50
    ys = np.asarray(ys, float)
    xs = np.arange(len(ys), dtype=float)
    lo, hi = float(ys.min()), float(ys.max())
    if hi == lo:
        lo, hi = lo - 0.5 * (abs(lo) or 1.0), hi + 0.5 * (abs(hi) or 1.0)
    xmax = max(float(xs[-1]), 1.0)
    px = pad + (w - 2 * pad) * xs / xmax
    py = h - pad - (h - 2 * pad) * (ys - lo) / (hi - lo)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px.tolist(), py.tolist()))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
        f'<rect width="{w}" height="{h}" fill="white"/>\n'
        f'<text x="{w / 2:.0f}" y="24" text-anchor="middle" font-size="14">{title}</text>\n'
        f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>\n'
        f'<text x="{w / 2:.0f}" y="{h - 12}" text-anchor="middle" font-size="12">iteration</text>\n'
        f'<text x="14" y="{h / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {h / 2:.0f})">{ylabel}</text>\n'
        f'<text x="{pad - 4}" y="{h - pad}" text-anchor="end" font-size="10">{lo:.4g}</text>\n'
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" font-size="10">{hi:.4g}</text>\n'
        f'<text x="{w - pad}" y="{h - pad + 14}" text-anchor="end" font-size="10">{len(ys) - 1}</text>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{pts}"/>\n'
        "</svg>\n")


def cmd_optimize(cfg: RunConfig, out: Path, args) -> int:
    if cfg.is_fixture:
        raise ConfigError("optimize needs a scenario family (rectangle or box)")
    if args.max_iters is not None:
        cfg.optimizer = replace(cfg.optimizer, max_iters=args.max_iters)
    design0 = cfg.design()
    mesh0 = cfg.build_mesh()
    pipeline = Pipeline(mat=cfg.require_material(), load=cfg.load, measure=cfg.require_measure(),
                        quad=build_quadrature(design0.scenario.dim, cfg.quadrature_order),
                        resolution=cfg.resolution, dirichlet=cfg.dirichlet(mesh0))
    snap_dir = out / "meshes"

    def snapshot(rec):
        write_mesh(cfg.scenario.mesh(rec.params, cfg.resolution), snap_dir / f"iter_{rec.iteration:04d}.txt")

    def progress(rec):
        if args.verbose:
            print(f"iter {rec.iteration:3d}  J = {rec.J:.6e}  vol = {rec.volume:.6f}  "
                  f"step = {rec.step:.3e}", flush=True)
        if args.snapshots:
            snapshot(rec)

    if args.snapshots:
        snap_dir.mkdir(parents=True, exist_ok=True)
        write_mesh(mesh0, snap_dir / "iter_0000.txt")
    trace = optimize(design0, cfg.optimizer, pipeline, cfg.admissibility, threads=args.threads,
                     callback=progress)
    _write(out / "trace.csv", trace.to_csv())
    summary = trace.summary()
    summary["run"] = cfg.echo()
    _write(out / "trace.json", jsonio.dumps(summary))
    if args.plot:
        _write(out / "trace.svg", _svg_plot([r.J for r in trace.records],
                                            "expected critical flaw count", "J"))
    print(f"{trace.status}: J {summary['initial_J']:.6e} -> {summary['final_J']:.6e}, "
          f"volume violation {summary['final_violation']:.2e} after {summary['iterations']} iterations")
    if not trace.feasible:
        print("volume constraint not met at exit", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_hazard_check(cfg: RunConfig, out: Path, args) -> int:
    check = hazard_convexity_check(cfg.require_measure(), cfg.kappa_grid)
    doc = {
        "run": cfg.echo(),
        "verdict": "PASS" if check.passed else "FAIL",
        "witness": None if check.witness is None else list(check.witness),
        "reason": check.reason,
        "measure": cfg.require_measure().to_dict(),
        "kappa_grid": {"min": float(cfg.kappa_grid[0]), "max": float(cfg.kappa_grid[-1]),
                       "n": int(len(cfg.kappa_grid))},
    }
    _write(out / "hazard_check.json", jsonio.dumps(doc))
    line = doc["verdict"]
    if check.witness is not None:
        line += f" (witness kappa pair {check.witness[0]:.6g}, {check.witness[1]:.6g})"
    elif check.reason:
        line += f" ({check.reason})"
    print(line)
    return EXIT_OK if check.passed else EXIT_FAIL


COMMANDS = {
    "solve": cmd_solve,
    "reliability": cmd_reliability,
    "mc-validate": cmd_mc_validate,
    "optimize": cmd_optimize,
    "hazard-check": cmd_hazard_check,
}


def _orders(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("orders must be positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ceramopt",
                                 description="Brittle-failure reliability and shape optimization.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (created if missing)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    ap.add_argument("--quadrature-order", type=int)
    ap.add_argument("--resolution", type=int)
    ap.add_argument("--sweep", type=_orders, help="reliability: quadrature orders, e.g. 2,4,8,16")
    ap.add_argument("--max-iters", type=int, help="optimize: iteration budget")
    ap.add_argument("--plot", action="store_true", help="optimize: write trace.svg (J vs iteration)")
    ap.add_argument("--snapshots", action="store_true", help="optimize: dump a mesh per iterate")
    ap.add_argument("--dump-system", action="store_true", help="solve: write stiffness triplets")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _apply_overrides(cfg: RunConfig, args) -> None:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg.seed = args.seed
    if args.quadrature_order is not None:
        if args.quadrature_order < 1:
            raise ConfigError("--quadrature-order must be a positive integer")
        cfg.quadrature_order = args.quadrature_order
    if args.resolution is not None:
        if args.resolution < 1:
            raise ConfigError("--resolution must be a positive integer")
        cfg.resolution = args.resolution
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if args.max_iters is not None and args.max_iters < 0:
        raise ConfigError("--max-iters must be >= 0")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        out = Path(args.out) if args.out else cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, UnsupportedMeasure) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NoAdmissibleStep as exc:
        print(f"optimizer error: {exc}", file=sys.stderr)
        return EXIT_NO_STEP
    except CeramoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
