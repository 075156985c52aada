"""Command line entry point and experiment runner."""

import argparse
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import SweepReport, action_gap, decay_fit, profile_error
from .config import ExperimentConfig, load_json, parse_dict, parse_peaks
from .errors import ConfigError, QGError
from .functionals import ProblemParams, gradient
from .graph import load_graph
from .mesh import DiscreteFunction, build_mesh, read_csv, write_csv
from .profiles import PeakSpec
from .solvers import (
    PeakedRecord,
    continuation_sweep,
    dual_norm,
    finish_record,
    least_action_solve,
    peaked_solve,
)
from .spectral import (
    linearized_operator,
    smallest_eigenpairs,
    star_kernel_coefficients,
    star_state,
)

log = logging.getLogger("qgnls")

EXIT_CONFIG = 2
EXIT_SOLVER = 1
SPECTRUM_C_MESH = 0.01


def _lam_tag(lam):
    return repr(float(lam))


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _peak_spec(cfg, lam):
    return PeakSpec(tuple(cfg.peaks), float(lam))


def _mesh_for(cfg, g, lam):
    return build_mesh(g, cfg.h_target or cfg.solver.h_target(lam))


class _Failure(Exception):
    def __init__(self, error, lam):
        self.error, self.lam = error, lam


def _run_solve(cfg, g, out):
    records, files = [], []
    for lam in cfg.lambdas:
        params = ProblemParams(lam, cfg.p)
        try:
            if cfg.mode == "peaked":
                res = peaked_solve(g, params, _peak_spec(cfg, lam), cfg.solver, mesh=_mesh_for(cfg, g, lam))
            else:
                res = least_action_solve(g, params, cfg.solver, mesh=_mesh_for(cfg, g, lam))
        except QGError as exc:
            raise _Failure(exc, lam) from None
        rec = res.record if isinstance(res, PeakedRecord) else res
        records.append(res.to_dict())
        files += write_csv(rec.u, os.path.join(out, f"solution_{_lam_tag(lam)}.csv"))
    _dump(os.path.join(out, "records.json"), records)
    return files + [os.path.join(out, "records.json")]


def _run_sweep(cfg, g, out):
    mode = cfg.sweep_mode or ("peaked" if cfg.mode == "peaked" or cfg.peaks else "least_action")
    solver = cfg.solver
    if cfg.h_target:
        # a fixed mesh size overrides the lambda-dependent rule
        solver = type(solver)(**{**solver.to_dict(), "c_mesh": cfg.h_target, "mesh_exponent": 0.0,
                                 "h_max": cfg.h_target})
    peaks = PeakSpec(tuple(cfg.peaks), cfg.lambdas[0]) if mode == "peaked" else None
    sweep = continuation_sweep(g, cfg.p, cfg.lambdas, mode, solver, peaks=peaks,
                               warm_start=cfg.warm_start, workers=cfg.workers)
    files = _write_sweep(sweep, out)
    if not sweep.ok():
        first = sweep.entries[0]
        raise _Failure(QGError(json.dumps(first.get("error"))), first["lambda"])
    return files


def _write_sweep(sweep, out):
    files = []
    for e in sweep.ok():
        res = e["result"]
        rec = getattr(res, "record", res)
        files += write_csv(rec.u, os.path.join(out, f"solution_{_lam_tag(e['lambda'])}.csv"))
    _dump(os.path.join(out, "records.json"), sweep.to_dict())
    files.append(os.path.join(out, "records.json"))
    files.append(sweep.write_csv(os.path.join(out, "sweep.csv")))
    files += sweep.write_columns(out)
    return files


def _run_peaked(cfg, g, out):
    if len(cfg.lambdas) >= 3 and all(b > a for a, b in zip(cfg.lambdas, cfg.lambdas[1:])):
        return _run_sweep(cfg, g, out)
    return _run_solve(cfg, g, out)


def _run_spectrum(cfg, g, out):
    opts = cfg.spectrum
    results = []
    for lam in cfg.lambdas:
        params = ProblemParams(lam, cfg.p)
        mesh = build_mesh(g, cfg.h_target or min(cfg.solver.h_max, SPECTRUM_C_MESH / lam ** 0.5))
        center = opts.center or max(g.vertices, key=lambda v: (g.degree(v), -g.vertex_index[v]))
        if opts.state == "star":
            u = star_state(mesh, cfg.p, center, lam)
        elif opts.state == "zero":
            u = DiscreteFunction(mesh, np.zeros(mesh.ndof))
        else:
            try:
                u = least_action_solve(g, params, cfg.solver, mesh=mesh).u
            except QGError as exc:
                raise _Failure(exc, lam) from None
        op = linearized_operator(mesh, params, u)
        k = opts.k or min(max(g.degrees().values()) + 2, mesh.ndof - 1)
        try:
            rep = smallest_eigenpairs(op, k, shift=opts.shift, seed=cfg.solver.random_seed)
        except QGError as exc:
            raise _Failure(exc, lam) from None
        entry = {"lambda": lam, "p": cfg.p, "state": opts.state, "center": center,
                 "mesh": mesh.descriptor(), **rep.to_dict(opts.kernel_tol)}
        if opts.state == "star":
            coeffs = star_kernel_coefficients(rep, cfg.p, center, opts.kernel_tol, lam)
            entry["kernel_coefficients"] = coeffs
            entry["kernel_coefficient_sums"] = [sum(c.values()) for c in coeffs]
        results.append(entry)
    path = os.path.join(out, "spectrum.json")
    _dump(path, results if len(results) > 1 else results[0])
    return [path]


def _profile_entry(rec, params, g):
    entry = {"lambda": params.lam, "peaks": [pk.to_dict() for pk in rec.peaks]}
    if rec.nehari_action is not None:
        entry["nehari_action"] = rec.nehari_action
        entry["action_gap"] = action_gap(rec, params.p)
    top = rec.peaks[0] if rec.peaks else None
    if top is not None and top.is_vertex and g.degree(top.vertex) == 1:
        entry["peak_vertex"] = top.vertex
        entry["peak_at_terminal_vertex"] = True
        entry["profile_error"] = profile_error(rec.u, params, top.vertex)
        eid = g.edges[g.adjacency[g.vertex_index[top.vertex]][0][0]].id
        length = g.edge(eid).length
        try:
            fit = decay_fit(rec.u, eid, (length / 4, 3 * length / 8), params.lam, params.p,
                            from_vertex=top.vertex)
            entry["decay"] = {"c1": fit.c1, "c2_hat": fit.c2, "window": list(fit.fit_window),
                              "r_squared": fit.r_squared}
        except (QGError, ValueError) as exc:
            entry["decay"] = {"error": str(exc)}
        longest = max(e.length for e in g.edges if
                      len(g.adjacency[e.a]) == 1 or len(g.adjacency[e.b]) == 1)
        entry["peak_edge_length"] = length
        entry["longest_terminal_edge_length"] = longest
    else:
        entry["peak_at_terminal_vertex"] = False
    return entry


def _run_profile_check(cfg, g, out):
    entries, files = [], []
    for lam in cfg.lambdas:
        params = ProblemParams(lam, cfg.p)
        try:
            if cfg.solution:
                u = read_csv(cfg.solution, g)
                res = dual_norm(u.mesh, lam, gradient(u, params))
                rec = finish_record(u, params, res, 0, "loaded")
            else:
                rec = least_action_solve(g, params, cfg.solver, mesh=_mesh_for(cfg, g, lam))
                files += write_csv(rec.u, os.path.join(out, f"solution_{_lam_tag(lam)}.csv"))
        except QGError as exc:
            raise _Failure(exc, lam) from None
        entries.append(_profile_entry(rec, params, g))
    path = os.path.join(out, "profile.json")
    _dump(path, entries)
    return files + [path]


RUNNERS = {
    "solve": _run_solve,
    "sweep": _run_sweep,
    "peaked": _run_peaked,
    "spectrum": _run_spectrum,
    "profile-check": _run_profile_check,
}


def run(cfg: ExperimentConfig):
    """Execute one experiment; returns the process exit status."""
    t0 = time.perf_counter()
    started = datetime.now(timezone.utc).isoformat()
    os.makedirs(cfg.output, exist_ok=True)
    manifest = {
        "tool": "qgnls",
        "version": __version__,
        "python": platform.python_version(),
        "started": started,
        "seed": cfg.solver.random_seed,
        "config": cfg.to_dict(),
    }
    status = 0
    try:
        g = load_graph(cfg.graph)
        manifest["graph"] = {
            "vertex_index": {v: i for i, v in enumerate(g.vertices)},
            "edge_index": {e.id: k for k, e in enumerate(g.edges)},
        }
        manifest["files"] = [os.path.basename(f) for f in RUNNERS[cfg.mode](cfg, g, cfg.output)]
    except _Failure as fail:
        status = EXIT_SOLVER
        err = fail.error.to_dict()
        err["lambda"] = fail.lam
        _dump(os.path.join(cfg.output, "error.json"), err)
        print(json.dumps(err), file=sys.stderr)
        manifest["error"] = err
    except QGError as exc:
        status = EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_SOLVER
        err = exc.to_dict()
        _dump(os.path.join(cfg.output, "error.json"), err)
        print(json.dumps(err), file=sys.stderr)
        manifest["error"] = err
    manifest["wall_time_s"] = time.perf_counter() - t0
    manifest["status"] = status
    _dump(os.path.join(cfg.output, "manifest.json"), manifest)
    return status


def build_parser():
    defaults = (
        "solver defaults: newton_tol=1e-10, newton_max_iter=60, gradient_flow_step=0.5, "
        "gradient_flow_max_iter=400, c_mesh=0.1, mesh_exponent=0.5, h_max=0.1, seed=0; "
        "mesh size h = min(h_max, c_mesh * lambda^-mesh_exponent) unless --h-target is given"
    )
    parser = argparse.ArgumentParser(prog="qgnls", description="NLS standing waves on metric graphs",
                                     epilog=defaults)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("solve", "sweep", "peaked", "spectrum", "profile-check"):
        sp = sub.add_parser(mode, epilog=defaults)
        sp.add_argument("--config", help="JSON experiment config; flags override it")
        sp.add_argument("--graph", help="graph JSON file")
        sp.add_argument("--p", type=float, help="nonlinearity exponent (default 3)")
        sp.add_argument("--lambda", dest="lam", help="comma-separated frequencies")
        sp.add_argument("--lambda-range", help="min,max,count[,log|lin]")
        sp.add_argument("--h-target", type=float, help="fixed mesh size")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--peaks", help="comma-separated terminal vertices")
        sp.add_argument("--solution", help="solution CSV to check (profile-check)")
        sp.add_argument("--center", help="star centre vertex (spectrum)")
        sp.add_argument("--state", choices=("star", "zero", "least_action"), help="base state (spectrum)")
        sp.add_argument("--k", type=int, help="number of eigenpairs (spectrum)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overlay(raw, args):
    raw = dict(raw)
    raw["mode"] = args.mode
    if args.graph:
        raw["graph"] = os.path.abspath(args.graph)
    if args.p is not None:
        raw["p"] = args.p
    if args.lam:
        try:
            raw["lambda"] = [float(s) for s in args.lam.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"--lambda: cannot parse {args.lam!r}") from None
        raw.pop("lambda_range", None)
    if args.lambda_range:
        parts = args.lambda_range.split(",")
        try:
            rng = {"min": float(parts[0]), "max": float(parts[1]), "count": int(parts[2])}
        except (IndexError, ValueError):
            raise ConfigError(f"--lambda-range: expected min,max,count[,log|lin], got {args.lambda_range!r}") from None
        if len(parts) > 3:
            rng["log"] = parts[3].strip() != "lin"
        raw["lambda_range"] = rng
        raw.pop("lambda", None)
    if args.h_target is not None:
        raw["h_target"] = args.h_target
    if args.seed is not None:
        raw.setdefault("solver", {})
        raw["solver"] = {**raw["solver"], "random_seed": args.seed}
    if args.out:
        raw["output"] = args.out
    if args.peaks:
        raw["peaks"] = [s.strip() for s in args.peaks.split(",") if s.strip()]
    if args.solution:
        raw["solution"] = os.path.abspath(args.solution)
    spec = dict(raw.get("spectrum") or {})
    if args.center:
        spec["center"] = args.center
    if args.state:
        spec["state"] = args.state
    if args.k:
        spec["k"] = args.k
    if spec:
        raw["spectrum"] = spec
    return raw


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out or "out"
    try:
        base = "."
        raw = {}
        if args.config:
            raw = load_json(args.config)
            if not isinstance(raw, dict):
                raise ConfigError("config must be a JSON object")
            base = os.path.dirname(os.path.abspath(args.config))
            if "output" in raw and not args.out:
                out = os.path.join(base, raw["output"]) if not os.path.isabs(raw["output"]) else raw["output"]
        raw = _overlay(raw, args)
        raw["output"] = out
        cfg = parse_dict(raw, base_dir=base)
    except ConfigError as exc:
        os.makedirs(out, exist_ok=True)
        err = exc.to_dict()
        _dump(os.path.join(out, "error.json"), err)
        print(json.dumps(err), file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
