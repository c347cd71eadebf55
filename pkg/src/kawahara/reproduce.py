"""Golden reproduction suite: every published value and acceptance threshold in one table.

Each row compares a computed number against a reference with the rule
``pass == |computed - reference| <= tolerance * max(1, |reference|)``.
One-sided bounds use reference 0; boolean checks use reference 1 and
computed 1/0 with tolerance 0.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["ReproductionReport", "reproduce_all", "GROUPS", "report_table"]


@dataclass
class ReproductionReport:
    item: str
    paper_value: float
    computed_value: float
    tolerance: float
    passed: bool
    criterion: int = 0
    note: str = ""

    @classmethod
    def make(cls, item, reference, computed, tolerance, criterion, note=""):
        computed = float(computed)
        ok = math.isfinite(computed) and (
            abs(computed - reference) <= tolerance * max(1.0, abs(reference)))
        return cls(item, float(reference), computed, float(tolerance), bool(ok), criterion, note)

    @classmethod
    def flag(cls, item, ok, criterion, note=""):
        return cls(item, 1.0, 1.0 if ok else 0.0, 0.0, bool(ok), criterion, note)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _relative(item, reference, computed, rel, criterion, note=""):
    # express a relative tolerance in the max(1, |ref|) convention
    tol = rel * abs(reference) / max(1.0, abs(reference))
    return ReproductionReport.make(item, reference, computed, tol, criterion, note)


J_REFERENCE = {1: -10.0787, 2: -1.9325, 3: -0.5649, 4: -0.1443, 5: 0.0252}


def group_index():
    from .index import index_both

    rows = []
    for p, ref in J_REFERENCE.items():
        rep = index_both(p)
        rows.append(_relative(f"J_{p}", ref, rep.j_half, 0.02, 1, "half-line, BVP"))
        rows.append(ReproductionReport.flag(f"J_{p} sign", np.sign(rep.j_half) == np.sign(ref), 1))
        rows.append(ReproductionReport.make(f"J_{p} BVP/spectral agreement", 0.0,
                                            rep.method_agreement, 1e-3, 1, "relative difference"))
    return rows


def group_pcrit():
    from .index import critical_exponent

    t0 = time.perf_counter()
    pc = critical_exponent()
    elapsed = time.perf_counter() - t0
    return [ReproductionReport.make("p_crit", 4.84, pc, 0.05, 2),
            ReproductionReport.make("p_crit runtime [s]", 0.0, elapsed, 60.0, 2)]


def group_spectrum():
    from .linop import assemble, bottom_spectrum
    from .solitons import critical_speed, explicit_gkw_soliton

    rows = []
    for p in range(1, 6):
        # c = 1, mu = mu_p
        prof = explicit_gkw_soliton(p, mu=critical_speed(p))
        rep = bottom_spectrum(assemble(prof), 6)
        rows.append(ReproductionReport.make(f"P2 negative_count p={p}", 1.0, rep.negative_count, 0.0, 3))
        rows.append(ReproductionReport.make(f"P3 kernel eigenvalue p={p}", 0.0,
                                            rep.kernel_eigenvalue, 1e-6, 3))
        rows.append(ReproductionReport.make(f"P3 kernel alignment p={p}", 1.0,
                                            rep.kernel_alignment, 1e-3, 3))
        rows.append(ReproductionReport.make(f"P1 essential floor p={p}", prof.params.c,
                                            rep.essential_floor, 1e-10, 3))
    return rows


def group_albert():
    from .linop import albert_criterion, log_concavity_bracket

    rows = []
    for p in range(1, 6):
        rep = albert_criterion(p)
        rows.append(ReproductionReport.flag(f"Albert transform positivity p={p}", rep.positivity_ok, 4))
        rows.append(ReproductionReport.flag(f"Albert bracket negative p={p}", rep.logconcavity_ok, 4))
    rows.append(ReproductionReport.make("log-concavity bracket at omega=1", -0.92600,
                                        float(log_concavity_bracket(1.0)), 1e-4, 4))
    return rows


def group_residuals():
    from .solitons import explicit_gkw_soliton, gkdv_soliton, residual_l2

    def res(prof):
        return residual_l2(prof.field, prof.params)

    rows = []
    for p in range(1, 6):
        # default decay-adapted windows, refined to N = 2048
        g = explicit_gkw_soliton(p).grid.refined(2)
        rows.append(ReproductionReport.make(f"explicit gKW residual p={p}", 0.0,
                                            res(explicit_gkw_soliton(p, g)), 1e-8, 5))
        g = gkdv_soliton(1.0, p).grid.refined(2)
        rows.append(ReproductionReport.make(f"gKdV residual p={p}", 0.0,
                                            res(gkdv_soliton(1.0, p, g)), 1e-8, 5))
    return rows


def _branch_rows(p):
    from .continuation import newton_continue
    from .solitons import critical_speed, explicit_gkw_soliton

    seed = explicit_gkw_soliton(p)
    cp = critical_speed(p)
    pts, failed = [], False
    for target in (0.9 * cp, 1.1 * cp):
        br = newton_continue(seed, target, 10)
        failed |= br.failed
        pts.extend(br.points)
    max_res = max(bp.newton_residual for bp in pts)
    min_margin = min(bp.coercivity_margin for bp in pts)
    return [
        ReproductionReport.flag(f"continuation converged p={p}", not failed, 6),
        ReproductionReport.make(f"continuation max Newton residual p={p}", 0.0, max_res, 1e-9, 6),
        ReproductionReport.flag(f"coercivity margin > 0 on branch p={p}", min_margin > 0, 6,
                                f"min margin {min_margin:.4g}"),
    ]


def group_continuation(p):
    return _branch_rows(p)


def group_p5_margin():
    from .continuation import coercivity_check
    from .solitons import explicit_gkw_soliton

    m = coercivity_check(explicit_gkw_soliton(5))
    return [ReproductionReport.flag("coercivity margin < 0 at p=5, c=c_5", m < 0, 6,
                                    f"margin {m:.4g}")]


def group_groundstate():
    from .groundstate import (MinimizationProblem, beta_p, empirical_uniqueness_probe,
                              minimize, scaling_identity_check)

    rows = [ReproductionReport.make("beta_1 closed form", 9.6, beta_p(1), 1e-12, 7)]
    for p in (1, 2, 3):
        results = [minimize(MinimizationProblem(p, mu)).to_dict() for mu in (1e-1, 1e-2, 1e-3, 1e-4)]
        bp = beta_p(p)
        kerr = max(abs(r["k_value"] - bp) for r in results)
        alphas = [r["alpha"] for r in results]
        dists = [r["h1_distance_to_gkdv"] for r in results]
        rows.append(ReproductionReport.make(f"K_p constraint p={p}", 0.0, kerr, 1e-8, 7))
        rows.append(ReproductionReport.flag(f"alpha <= 1.05 p={p}", max(alphas) <= 1.05, 7,
                                            f"max alpha {max(alphas):.6g}"))
        rows.append(ReproductionReport.flag(
            f"alpha monotone toward 1 p={p}",
            all(abs(a2 - 1) < abs(a1 - 1) for a1, a2 in zip(alphas, alphas[1:])), 7,
            " ".join(f"{a:.6g}" for a in alphas)))
        rows.append(ReproductionReport.flag(
            f"H1 distance to gKdV decreasing p={p}",
            all(d2 < d1 for d1, d2 in zip(dists, dists[1:])), 7,
            " ".join(f"{d:.3g}" for d in dists)))
    rows.append(ReproductionReport.make("scaling identity p=1 mu=1e-2", 0.0,
                                        scaling_identity_check(1, 1e-2, 2 * beta_p(1)), 1e-6, 7))
    for p in (1, 3):
        spread = empirical_uniqueness_probe(MinimizationProblem(p, 1e-3), 5, seed=0)
        rows.append(ReproductionReport.make(f"multi-start spread p={p} mu=1e-3", 0.0, spread, 1e-8, 7))
    return rows


def group_evolution():
    from .evolution import conserved, evolve, orbital_distance
    from .grid import sobolev_norm, translate
    from .solitons import explicit_gkw_soliton

    prof = explicit_gkw_soliton(1)
    c, T = prof.params.c, 50.0
    e0, v0 = conserved(prof.field, prof.params)
    drifts = {"E": 0.0, "V": 0.0}

    def watch(t, u):
        e, v = conserved(u, prof.params)
        drifts["E"] = max(drifts["E"], abs(e - e0) / abs(e0))
        drifts["V"] = max(drifts["V"], abs(v - v0) / abs(v0))

    final = evolve(prof.field, prof.params, 1e-3, T, sample_every=1.0, callback=watch)
    exact_err = sobolev_norm(final.u - translate(prof.field, c * T), 2)
    orbit_err, _ = orbital_distance(final.u, prof)

    def drift_at(dt):
        st = evolve(prof.field, prof.params, dt, T)
        return max(abs(st.energy - e0) / abs(e0), abs(st.mass - v0) / abs(v0))

    coarse, fine = drift_at(0.1), drift_at(0.05)
    return [
        ReproductionReport.make("exact soliton H2 error T=50 p=1", 0.0, max(exact_err, orbit_err), 1e-5, 8),
        ReproductionReport.make("energy drift T=50 p=1", 0.0, drifts["E"], 1e-8, 8),
        ReproductionReport.make("mass drift T=50 p=1", 0.0, drifts["V"], 1e-8, 8),
        ReproductionReport.flag("drift ratio under dt halving >= 8", coarse / fine >= 8.0, 8,
                                f"dt 0.1 -> 0.05: {coarse:.3e} -> {fine:.3e} (x{coarse / fine:.1f})"),
    ]


def group_stability(branch, p):
    from .evolution import stability_experiment
    from .solitons import critical_speed

    delta = 1e-3
    param = critical_speed(p) if branch == "explicit" else 1e-2
    tr = stability_experiment(p, branch, param, delta, 100.0)
    return [ReproductionReport.make(
        f"stability {branch} p={p}: sup distance / delta", 0.0, tr.sup_distance / delta, 5.0, 8,
        f"finite horizon T=100 only; energy drift {tr.energy_drift:.2e}")]


GROUPS = (
    [("index", ()), ("pcrit", ()), ("spectrum", ()), ("albert", ()), ("residuals", ())]
    + [("continuation", (p,)) for p in (1, 2, 3, 4)]
    + [("p5_margin", ()), ("groundstate", ()), ("evolution", ())]
    + [("stability", ("explicit", p)) for p in (1, 2, 3, 4)]
    + [("stability", ("slow", p)) for p in (1, 2, 3)]
)


def _run_group(spec):
    name, args = spec
    fn = globals()[f"group_{name}"]
    try:
        return fn(*args)
    except Exception as exc:  # a failing group is recorded, not fatal
        label = name + ("" if not args else " " + " ".join(map(str, args)))
        return [ReproductionReport.flag(f"{label} (error)", False, 0, f"{type(exc).__name__}: {exc}")]


def reproduce_all(jobs: int = 1, groups=None) -> list[ReproductionReport]:
    """Run the golden suite; rows come back in a fixed order regardless of ``jobs``."""
    specs = list(GROUPS if groups is None else groups)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_group, specs))
    else:
        chunks = [_run_group(s) for s in specs]
    return [row for chunk in chunks for row in chunk]


def report_table(rows) -> str:
    width = max(len(r.item) for r in rows)
    lines = []
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  [{r.criterion}] {r.item:<{width}}  ref={r.paper_value:<12.6g} "
                     f"got={r.computed_value:<14.6g} tol={r.tolerance:.3g}  {r.note}".rstrip())
    return "\n".join(lines)
