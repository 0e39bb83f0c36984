"""Command line front end: ``qcurv <command> --manifold <config|name> ...``.

Every command writes ``<command>.json`` (deterministic, sorted keys) and
``<command>.meta.json`` (wall-clock data) into ``--out``. Exit status is 0
on success, 2 when a theorem-level negative fires (Fredholm violation,
certified obstruction) and 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FredholmViolation, NonConvergence, NotConstantQ, QCurvError
from .fields import ConformalFactor, ScalarField, field_from_csv, field_to_csv, random_conformal_factor
from .geometry import (
    curvature_scalars,
    sphere_hyperbolic,
    flat_torus4,
    load_config,
    manifold_from_dict,
    sphere_sphere,
    sphere_torus,
)
from .kernel import DEFAULT_TOL, scan_parameter
from .paneitz import CONVENTIONS, CONVENTIONS_HASH
from .prescribe import iterate_constant_q, solve_q_flat
from .qfunctional import (
    build_context,
    constant_q_obstruction,
    decompose,
    forbidden_certificate,
    harmonic_report,
    hodge_compare,
    k_q_drift,
    nq_basis,
    q_functional_drift,
)

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2

NAMED = {
    "s2xs2": sphere_sphere,
    "s2xt2": sphere_torus,
    "t4": flat_torus4,
    "s2xh2": sphere_hyperbolic,
}


@dataclass
class ExperimentConfig:
    manifold: dict
    source: str
    sector: str
    seed: int
    tol: float
    params: dict = field(default_factory=dict)


class NegativeResult(Exception):
    """Carries a report for a mathematically meaningful negative outcome."""

    def __init__(self, report: dict):
        super().__init__(report.get("outcome", "negative"))
        self.report = report


def worker_count() -> int:
    raw = os.environ.get("QCURV_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"QCURV_THREADS: expected an integer, got {raw!r}") from None


def parallel_map(func, items):
    n = worker_count()
    if n == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_field_atomic(path: Path, f: ScalarField):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        field_to_csv(f, tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


# -- configuration -----------------------------------------------------------


def resolve_config(args) -> ExperimentConfig:
    spec = args.manifold
    data: dict = {}
    if spec in NAMED:
        manifold = NAMED[spec]()
    else:
        data = load_config(spec)
        manifold = manifold_from_dict(data)
    exp = data.get("experiment", {}) if isinstance(data, dict) else {}
    if not isinstance(exp, dict):
        raise ConfigError(f"{spec}: experiment: expected a table")
    sector = args.sector or exp.get("sector")
    if sector is None:
        sector = "full" if manifold.factor2.grid_backed and manifold.factor1.grid_backed else "factor1"
    if sector not in ("full", "factor1"):
        raise ConfigError(f"{spec}: experiment.sector: expected 'full' or 'factor1', got {sector!r}")
    seed = args.seed if args.seed is not None else exp.get("seed", 0)
    tol = args.tol if args.tol is not None else exp.get("tol", DEFAULT_TOL)
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise ConfigError(f"{spec}: experiment.seed: expected an unsigned 64-bit integer, got {seed!r}")
    try:
        tol = float(tol)
    except (TypeError, ValueError):
        raise ConfigError(f"{spec}: experiment.tol: expected a number, got {tol!r}") from None
    return ExperimentConfig(manifold.to_dict(), spec, sector, seed, tol)


def _manifold(cfg: ExperimentConfig):
    return manifold_from_dict(cfg.manifold)


def _context(cfg: ExperimentConfig, omega0_path: str | None = None):
    ctx = build_context(_manifold(cfg), cfg.sector, tol=cfg.tol)
    if omega0_path:
        om = ConformalFactor(field_from_csv(omega0_path, ctx.sector))
        ctx = ctx.rescaled(om)
    return ctx


def _omegas(ctx, seed: int, n: int):
    return [random_conformal_factor(ctx.sector, np.random.default_rng([seed, i])) for i in range(n)]


# -- commands ----------------------------------------------------------------


def cmd_describe(cfg, args, out: Path) -> dict:
    ctx = _context(cfg)
    curv = curvature_scalars(ctx.manifold)
    rep = {
        "curvature": asdict(curv),
        "Q": ctx.k_q / ctx.volume,
        "Q_sup": ctx.q.sup_norm(),
        "k_Q": ctx.k_q,
        "k_Q_scale": ctx.k_q_scale,
        "volume": ctx.volume,
        "euler_characteristic": ctx.manifold.euler_characteristic,
        "dim_NP": ctx.kernel.dim,
        "kernel_status": ctx.kernel.status,
        "kernel_gap": ctx.kernel.gap,
        "kernel_threshold": ctx.kernel.threshold,
    }
    if ctx.kernel.proof_note is not None:
        rep["positivity_note"] = ctx.kernel.proof_note
    nq = nq_basis(ctx)
    rep["dim_NQ"] = nq.dim
    rep["NQ_equals_NP"] = nq.codim_in_NP == 0
    return rep


def cmd_scan(cfg, args, out: Path) -> dict:
    res = scan_parameter(_manifold(cfg), args.factor, args.parameter, args.start, args.stop, args.steps,
                         sector=cfg.sector, tol=cfg.tol, workers=worker_count())
    table = csv_text(["param", "dim", "min_abs_lambda"], res.table())
    write_atomic(out / "scan-kernel.csv", table)
    cfg.params.update(factor=args.factor, parameter=args.parameter, start=args.start, stop=args.stop,
                      steps=args.steps)
    return {
        "brackets": res.brackets,
        "max_dim": max(s.dim for s in res.steps),
        "uncertified_steps": [s.param for s in res.steps if not s.certified],
        "_csv": table,
    }


def cmd_invariance(cfg, args, out: Path) -> dict:
    ctx = _context(cfg)
    ctx.sector.require_grid()
    omegas = _omegas(ctx, cfg.seed, args.samples)
    cfg.params.update(samples=args.samples)
    kq = k_q_drift(ctx, omegas)
    nq = nq_basis(ctx)
    members = list(ctx.kernel.fields)
    drifts = parallel_map(lambda u: q_functional_drift(ctx, u, omegas), members)
    return {
        "k_Q": kq["reference"],
        "k_Q_max_relative_drift": kq["max_relative_drift"],
        "q_functional": [
            {"element": i, "reference": d["reference"], "max_relative_drift": d["max_relative_drift"]}
            for i, d in enumerate(drifts)
        ],
        "dim_NQ": nq.dim,
        "omega_aliasing_max": max((om.aliasing for om in omegas), default=0.0),
    }


def cmd_check_forbidden(cfg, args, out: Path) -> dict:
    ctx = _context(cfg)
    ctx.sector.require_grid()
    if args.field is None:
        res = constant_q_obstruction(ctx)
        rep = {"obstruction": res.status, "heuristic": res.heuristic, "evidence": res.evidence}
        if res.witness is not None:
            write_field_atomic(out / "witness.csv", res.witness)
        if res.obstructed:
            raise NegativeResult({**rep, "outcome": "CertifiedObstructed"})
        return rep
    f = field_from_csv(args.field, ctx.sector)
    cfg.params.update(field=args.field)
    cert = forbidden_certificate(ctx, f)
    if cert.witness is not None:
        write_field_atomic(out / "witness.csv", cert.witness)
    return {"certificate": cert.to_dict()}


def cmd_decompose(cfg, args, out: Path) -> dict:
    ctx = _context(cfg)
    u = field_from_csv(args.field, ctx.sector)
    cfg.params.update(field=args.field)
    dec = decompose(ctx, u)
    write_field_atomic(out / "u1.csv", dec.u1)
    rep = {"u0": dec.u0, "Q_of_u": dec.q_of_u, "k_Q": dec.k_q}
    if ctx.sector.grid_backed:
        try:
            h = hodge_compare(ctx, u)
            rep["hodge"] = asdict(h)
        except NotConstantQ as exc:
            rep["hodge"] = {"skipped": str(exc)}
    return rep


def cmd_harmonics(cfg, args, out: Path) -> dict:
    return harmonic_report(_context(cfg))


def cmd_solve_qflat(cfg, args, out: Path) -> dict:
    ctx = _context(cfg, args.omega0)
    cfg.params.update(omega0=args.omega0)
    try:
        res = solve_q_flat(ctx)
    except FredholmViolation as exc:
        raise NegativeResult({
            "outcome": "FredholmViolation",
            "integrals": dict(zip(exc.labels, exc.integrals)),
            "scales": dict(zip(exc.labels, exc.scales)),
        }) from None
    write_field_atomic(out / "omega.csv", res.omega.omega)
    post = nq_basis(res.context(ctx))
    return {"result": res.to_dict(), "post_solve_NQ_equals_NP": post.codim_in_NP == 0}


def cmd_iterate(cfg, args, out: Path) -> dict:
    ctx = _context(cfg, args.omega0)
    cfg.params.update(target=args.target, damping=args.damping, max_iter=args.max_iter, omega0=args.omega0)
    try:
        res = iterate_constant_q(ctx, args.target, args.damping, args.max_iter)
    except FredholmViolation as exc:
        raise NegativeResult({
            "outcome": "FredholmViolation",
            "message": str(exc),
            "integrals": dict(zip(exc.labels, exc.integrals)),
        }) from None
    except NonConvergence as exc:
        _write_trace(out, exc.trace)
        raise
    _write_trace(out, res.trace)
    write_field_atomic(out / "omega.csv", res.omega.omega)
    return {"result": res.to_dict()}


def _write_trace(out: Path, trace):
    rows = [(t["iteration"], t["residual"], t["kernel_moment_error"], t["step"]) for t in trace]
    write_atomic(out / "trace.csv", csv_text(["iteration", "residual", "kernel_moment_error", "step"], rows))


COMMANDS = {
    "describe": cmd_describe,
    "scan-kernel": cmd_scan,
    "invariance-suite": cmd_invariance,
    "check-forbidden": cmd_check_forbidden,
    "decompose": cmd_decompose,
    "report-harmonics": cmd_harmonics,
    "solve-qflat": cmd_solve_qflat,
    "iterate-constq": cmd_iterate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifold", required=True,
                        help=f"TOML/JSON config path or one of {', '.join(NAMED)}")
    common.add_argument("--sector", choices=("full", "factor1"), default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="what to print on stdout (files are always written)")

    parser = argparse.ArgumentParser(prog="qcurv", description="Paneitz kernels and Q-curvature experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("describe", parents=[common])
    p = sub.add_parser("scan-kernel", parents=[common])
    p.add_argument("--factor", type=int, choices=(1, 2), default=1)
    p.add_argument("--parameter", default="radius")
    p.add_argument("--start", type=float, default=0.5)
    p.add_argument("--stop", type=float, default=1.5)
    p.add_argument("--steps", type=int, default=101)
    p = sub.add_parser("invariance-suite", parents=[common])
    p.add_argument("--samples", type=int, default=20)
    p = sub.add_parser("check-forbidden", parents=[common])
    p.add_argument("--field", help="coefficient CSV; omit to search for a constant-Q obstruction")
    p = sub.add_parser("decompose", parents=[common])
    p.add_argument("--field", required=True)
    sub.add_parser("report-harmonics", parents=[common])
    p = sub.add_parser("solve-qflat", parents=[common])
    p.add_argument("--omega0", help="coefficient CSV of a starting conformal factor")
    p = sub.add_parser("iterate-constq", parents=[common])
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--omega0")
    return parser


def _emit(out: Path, command: str, cfg: ExperimentConfig, body: dict, status: str, fmt: str, started: float):
    table = body.pop("_csv", None)
    report = {
        "command": command,
        "status": status,
        "config": asdict(cfg),
        "conventions": CONVENTIONS,
        "conventions_hash": CONVENTIONS_HASH,
        "version": __version__,
        "report": body,
    }
    text = dumps(report)
    write_atomic(out / f"{command}.json", text)
    meta = {"command": command, "started_unix": started, "elapsed_s": time.time() - started,
            "threads": worker_count()}
    write_atomic(out / f"{command}.meta.json", dumps(meta))
    sys.stdout.write(table if fmt == "csv" and table is not None else text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    out = Path(args.out)
    try:
        cfg = resolve_config(args)
        body = COMMANDS[args.command](cfg, args, out)
    except NegativeResult as neg:
        _emit(out, args.command, cfg, neg.report, "negative", args.format, started)
        return EXIT_NEGATIVE
    except (QCurvError, OSError, ValueError) as exc:
        print(f"qcurv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(out, args.command, cfg, body, "ok", args.format, started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
