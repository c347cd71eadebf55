"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 computation failure, 3 golden-suite
failure.  Grid defaults can be overridden with ``KAWAHARA_NUM_POINTS`` and
``KAWAHARA_HALF_LENGTH``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

from .grid import GridError, GridSpec

__all__ = ["main", "build_parser", "RunConfig", "UsageError", "dispatch", "write_atomic"]

log = logging.getLogger("kawahara")

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_GOLDEN = 0, 1, 2, 3
ENV_POINTS = "KAWAHARA_NUM_POINTS"
ENV_HALF_LENGTH = "KAWAHARA_HALF_LENGTH"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    args: dict = field(default_factory=dict)
    num_points: int | None = None
    half_length: float | None = None
    output_path: str | None = None
    format: str = "json"

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace, environ=os.environ) -> "RunConfig":
        args = {k: v for k, v in vars(ns).items()
                if k not in ("command", "num_points", "half_length", "output", "format", "verbose")}
        n = ns.num_points if ns.num_points is not None else _env(environ, ENV_POINTS, int)
        L = ns.half_length if ns.half_length is not None else _env(environ, ENV_HALF_LENGTH, float)
        return cls(ns.command, args, n, L, ns.output, ns.format)

    @property
    def has_grid_override(self) -> bool:
        return self.num_points is not None or self.half_length is not None

    def grid_for(self, default: GridSpec | None) -> GridSpec | None:
        """Apply overrides on top of a module default grid (``None`` keeps the module's choice)."""
        if self.num_points is None and self.half_length is None:
            return default
        if default is None and (self.num_points is None or self.half_length is None):
            raise UsageError("grid override needs both --num-points and --half-length here")
        n = self.num_points if self.num_points is not None else default.num_points
        L = self.half_length if self.half_length is not None else default.half_length
        try:
            return GridSpec(L, n)
        except GridError as exc:
            raise UsageError(str(exc)) from exc


def _env(environ, name, kind):
    raw = environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return kind(raw)
    except ValueError as exc:
        raise UsageError(f"{name}={raw!r} is not a valid {kind.__name__}") from exc


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {kind.__name__}: {text!r}")
        if not (math.isfinite(v) and v > 0):
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def _nonnegative(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return v


def _scan(text):
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError("scan must look like a:b:n")
    if n < 2 or not (0 < a < b):
        raise argparse.ArgumentTypeError("scan needs 0 < a < b and n >= 2")
    return a, b, n


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers")
    if not vals or any(not (v > 0) for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--num-points", type=_positive(int), help=f"grid size (env {ENV_POINTS})")
    common.add_argument("--half-length", type=_positive(float),
                        help=f"grid half-length (env {ENV_HALF_LENGTH})")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = _Parser(prog="kawahara", description="Solitary waves of the generalized Kawahara equation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("soliton", parents=[common], help="closed-form solitary wave")
    s.add_argument("--p", type=_positive(float), required=True)
    s.add_argument("--kind", choices=("explicit", "gkdv"), default="explicit")
    s.add_argument("--mu", type=_positive(float), default=1.0, help="explicit kind: c = c_p/mu")
    s.add_argument("--c", type=_positive(float), default=1.0, help="gkdv kind: speed")
    s.add_argument("--check-residual", action="store_true", help="fail unless L2 residual < 1e-8")
    s.add_argument("--with-values", action="store_true", help="include x and phi samples")

    s = sub.add_parser("spectrum", parents=[common], help="bottom of the linearized spectrum")
    s.add_argument("--p", type=_positive(float), required=True)
    s.add_argument("--mu", type=_positive(float), help="default: mu_p, so that c = 1")
    s.add_argument("--k", type=_positive(int), default=6)

    s = sub.add_parser("albert", parents=[common], help="Fourier positivity / log-concavity check")
    s.add_argument("--p", type=_positive(float), required=True)
    s.add_argument("--omega-max", type=_positive(float), default=50.0)
    s.add_argument("--samples", type=_positive(int), default=2000)

    s = sub.add_parser("index", parents=[common], help="stability index J_p")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--p", type=_positive(float))
    g.add_argument("--scan", type=_scan, metavar="A:B:N", help="tabulate J over N points in [A, B]")
    g.add_argument("--critical", action="store_true", help="bisect for the sign change in [4, 5]")
    s.add_argument("--method", choices=("bvp", "spectral", "both"), default="both")
    s.add_argument("--r-max", type=_positive(float))
    s.add_argument("--tol", type=_positive(float), default=1e-3)
    s.add_argument("--jobs", type=_positive(int), default=1)

    s = sub.add_parser("continue", parents=[common], help="Newton continuation in c at mu = 1")
    s.add_argument("--p", type=_positive(float), required=True)
    s.add_argument("--factor", type=_positive(float), default=1.1, help="target c = factor * c_p")
    s.add_argument("--steps", type=_positive(int), default=10)
    s.add_argument("--tol", type=_positive(float), default=1e-9)
    s.add_argument("--no-margin", action="store_true", help="skip the coercivity margin")

    s = sub.add_parser("groundstate", parents=[common], help="constrained minimizer at c = 1")
    s.add_argument("--p", type=_positive(int), required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--mu", type=_positive(float))
    g.add_argument("--mu-scan", type=_float_list, metavar="MU1,MU2,...")
    s.add_argument("--beta", type=_positive(float), help="constraint level (default beta_p)")
    s.add_argument("--starts", type=int, default=0, help="extra random starts for a uniqueness probe")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--allow-p4", action="store_true")

    s = sub.add_parser("evolve", parents=[common], help="perturbed-soliton stability run")
    s.add_argument("--p", type=_positive(int), required=True)
    s.add_argument("--branch", choices=("explicit", "slow"), required=True)
    s.add_argument("--param", type=_positive(float), help="c (explicit; default c_p) or mu (slow)")
    s.add_argument("--delta", type=_nonnegative, default=1e-3)
    s.add_argument("--horizon", type=_positive(float), default=100.0)
    s.add_argument("--dt", type=_positive(float))
    s.add_argument("--sample-every", type=_positive(float), default=1.0)
    s.add_argument("--perturbation", choices=("gaussian", "eigenfunction"), default="gaussian")

    s = sub.add_parser("reproduce", parents=[common], help="run the golden suite")
    s.add_argument("--jobs", type=_positive(int), default=1)
    return parser


# ---------------------------------------------------------------- serialization

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def render(payload, fmt: str) -> str:
    """JSON document, or CSV when the payload carries ``rows`` (list of dicts)."""
    if fmt == "csv":
        rows = payload.get("rows") if isinstance(payload, dict) else None
        if rows is None:
            rows = [{k: v for k, v in payload.items() if not isinstance(v, (dict, list))}]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- commands

def _cmd_soliton(cfg: RunConfig):
    from .solitons import critical_speed, explicit_gkw_soliton, gkdv_soliton, residual_l2

    a = cfg.args
    if a["kind"] == "explicit":
        prof = explicit_gkw_soliton(a["p"], mu=a["mu"])
        grid = cfg.grid_for(prof.grid)
        if grid != prof.grid:
            prof = explicit_gkw_soliton(a["p"], grid, mu=a["mu"])
    else:
        prof = gkdv_soliton(a["c"], a["p"])
        grid = cfg.grid_for(prof.grid)
        if grid != prof.grid:
            prof = gkdv_soliton(a["c"], a["p"], grid)
    report = prof.to_report()
    report["grid"] = prof.grid.to_dict()
    if a["kind"] == "explicit":
        report["critical_speed"] = critical_speed(a["p"])
    res = residual_l2(prof.field, prof.params)
    report["residual_l2"] = res
    if a["with_values"]:
        report["rows"] = [{"x": float(x), "phi": float(v)}
                          for x, v in zip(prof.grid.x, prof.field.values)]
    if a["check_residual"] and not res < 1e-8:
        raise _ComputationFailure(f"profile residual {res:.3e} >= 1e-8", report)
    return report


def _cmd_spectrum(cfg: RunConfig):
    from .linop import assemble, bottom_spectrum
    from .solitons import critical_speed, explicit_gkw_soliton

    a = cfg.args
    mu = a["mu"] if a["mu"] is not None else critical_speed(a["p"])
    prof = explicit_gkw_soliton(a["p"], mu=mu)
    grid = cfg.grid_for(prof.grid)
    if grid != prof.grid:
        prof = explicit_gkw_soliton(a["p"], grid, mu=mu)
    rep = bottom_spectrum(assemble(prof), a["k"])
    out = {**prof.params.to_dict(), **rep.to_dict(), "kernel_eigenvalue": rep.kernel_eigenvalue,
           "residual_norms": rep.residual_norms}
    out["rows"] = [{"index": i, "eigenvalue": ev} for i, ev in enumerate(rep.eigenvalues)]
    return out


def _cmd_albert(cfg: RunConfig):
    from .linop import albert_criterion

    a = cfg.args
    return albert_criterion(a["p"], omega_max=a["omega_max"], samples=a["samples"]).to_dict()


def _cmd_index(cfg: RunConfig):
    from .grid import default_grid
    from .index import critical_exponent, index_both, index_bvp, index_spectral, scan_index

    a = cfg.args
    if a["critical"]:
        return {"p_crit": critical_exponent(tol=a["tol"]), "bracket": [4.0, 5.0], "tol": a["tol"]}
    if a["scan"] is not None:
        lo, hi, n = a["scan"]
        ps = [lo + (hi - lo) * i / (n - 1) for i in range(n)]
        rows = [{"p": p, "j_half": jh, "j_full": jf} for p, jh, jf in scan_index(ps, jobs=a["jobs"])]
        return {"rows": rows}
    p, method = a["p"], a["method"]
    grid = cfg.grid_for(default_grid(1.0)) if cfg.has_grid_override else None
    if method == "bvp":
        rep = index_bvp(p, r_max=a["r_max"])
    elif method == "spectral":
        rep = index_spectral(p, grid=grid)
    else:
        rep = index_both(p, r_max=a["r_max"], grid=grid)
    return rep.to_dict()


def _cmd_continue(cfg: RunConfig):
    from .continuation import empirical_window, newton_continue
    from .solitons import critical_speed, explicit_gkw_soliton

    a = cfg.args
    seed = explicit_gkw_soliton(a["p"])
    grid = cfg.grid_for(seed.grid)
    if grid != seed.grid:
        seed = explicit_gkw_soliton(a["p"], grid)
    target = a["factor"] * critical_speed(a["p"])
    br = newton_continue(seed, target, a["steps"], tol=a["tol"], with_margin=not a["no_margin"])
    rows = [{"c": bp.params.c, "newton_residual": bp.newton_residual,
             "coercivity_margin": bp.coercivity_margin, "distance_to_seed": bp.distance_to_seed,
             "gamma": bp.gamma, "iterations": bp.newton_iterations} for bp in br]
    out = {"p": a["p"], "mu": 1.0, "c_seed": seed.params.c, "c_target": target,
           "failed": br.failed, "message": br.message, "rows": rows}
    if not a["no_margin"] and rows:
        out["empirical_window"] = list(empirical_window(br.points, seed.params.c))
    if br.failed:
        raise _ComputationFailure(br.message, out)
    return out


def _cmd_groundstate(cfg: RunConfig):
    from .grid import default_grid
    from .groundstate import MinimizationProblem, empirical_uniqueness_probe, minimize

    a = cfg.args
    mus = a["mu_scan"] if a["mu_scan"] is not None else [a["mu"]]
    grid = cfg.grid_for(default_grid(1.0)) if cfg.has_grid_override else None
    rows = []
    for mu in mus:
        prob = MinimizationProblem(a["p"], mu, a["beta"], grid, allow_p4=a["allow_p4"])
        row = minimize(prob).to_dict()
        if a["starts"] > 0:
            details = {}
            row["multi_start_spread"] = empirical_uniqueness_probe(prob, a["starts"], a["seed"], details)
            row["multi_start_converged"] = details["converged"]
        rows.append(row)
    return {"rows": rows} if len(rows) > 1 else rows[0]


def _cmd_evolve(cfg: RunConfig):
    from .evolution import solitary_profile, stability_experiment
    from .grid import default_grid
    from .solitons import critical_speed, explicit_gkw_soliton

    a = cfg.args
    p, branch = a["p"], a["branch"]
    if branch == "slow" and p not in (1, 2, 3):
        raise UsageError("slow branch needs p in {1, 2, 3}")
    param = a["param"]
    if param is None:
        if branch == "slow":
            raise UsageError("--param (mu) is required for the slow branch")
        param = critical_speed(p)
    grid = None
    if cfg.has_grid_override:
        base = explicit_gkw_soliton(p).grid if branch == "explicit" else default_grid(1.0)
        grid = cfg.grid_for(base)
    prof = solitary_profile(p, branch, param, grid)
    if a["delta"] > 0.1 * prof.amplitude:
        raise UsageError(f"--delta must be <= 0.1 x amplitude = {0.1 * prof.amplitude:.4g}")
    tr = stability_experiment(p, branch, param, a["delta"], a["horizon"], dt=a["dt"],
                              sample_every=a["sample_every"], perturbation=a["perturbation"],
                              profile=prof)
    rows = [{"t": t, "distance": d, "shift": z, "E": e, "V": v} for t, d, z, e, v in tr.rows()]
    return {"p": p, "branch": branch, "param": param, "delta": a["delta"], "horizon": a["horizon"],
            "sup_distance": tr.sup_distance, "energy_drift": tr.energy_drift,
            "mass_drift": tr.mass_drift, "label": tr.label, "rows": rows}


def _cmd_reproduce(cfg: RunConfig):
    from .reproduce import report_table, reproduce_all

    rows = reproduce_all(jobs=cfg.args["jobs"])
    print(report_table(rows), file=sys.stderr)
    out = {"rows": [r.to_dict() for r in rows], "all_pass": all(r.passed for r in rows),
           "note": "stability rows are finite-horizon tests (T=100), not proofs"}
    return out


COMMANDS = {
    "soliton": _cmd_soliton, "spectrum": _cmd_spectrum, "albert": _cmd_albert,
    "index": _cmd_index, "continue": _cmd_continue, "groundstate": _cmd_groundstate,
    "evolve": _cmd_evolve, "reproduce": _cmd_reproduce,
}


class _ComputationFailure(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


def _emit(cfg: RunConfig, payload) -> None:
    text = render(payload, cfg.format)
    if cfg.output_path:
        write_atomic(cfg.output_path, text)
    else:
        sys.stdout.write(text)


def _error_payload(kind: str, exc: BaseException) -> str:
    diag = getattr(exc, "diagnostics", None) or getattr(exc, "payload", None) or {}
    body = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(diag, dict):
        body["diagnostics"] = {k: v for k, v in diag.items() if k != "rows"}
    return json.dumps(_jsonable(body), sort_keys=True, default=str)


def dispatch(cfg: RunConfig) -> int:
    try:
        payload = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(_error_payload("usage", exc), file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, GridError) as exc:
        # operation preconditions surface as ValueError before any heavy work
        print(_error_payload("usage", exc), file=sys.stderr)
        return EXIT_USAGE
    except _ComputationFailure as exc:
        print(_error_payload("computation", exc), file=sys.stderr)
        return EXIT_COMPUTE
    except (RuntimeError, ArithmeticError, MemoryError) as exc:
        print(_error_payload("computation", exc), file=sys.stderr)
        return EXIT_COMPUTE
    _emit(cfg, payload)
    if cfg.command == "reproduce" and not payload["all_pass"]:
        return EXIT_GOLDEN
    return EXIT_OK


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = RunConfig.from_namespace(ns, os.environ if environ is None else environ)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return dispatch(cfg)


def reproduce_all(jobs: int = 1):
    """Golden suite rows (see :mod:`kawahara.reproduce`)."""
    from .reproduce import reproduce_all as run

    return run(jobs=jobs)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
