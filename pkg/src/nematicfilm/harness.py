"""Experiment orchestration: configs, named recipes, artifacts, audit trail.

Configs are flat INI files with sections [domain], [model], [boundary],
[solve], [run], [metrics] (plus [cell] / [wmap] where relevant).  A recipe is
a named bundle of default key/values; the user's file overrides it key by
key, and the fully merged mapping is echoed into every report.  Reports are
JSON with a ``schema`` field; wall-clock timings go to a sidecar so reports
from identical configs are byte-identical.
"""

from __future__ import annotations

import configparser
import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import defects as dfx
from . import diagnostics as diag
from . import domain as dom
from . import energy as en
from . import renorm as rn
from . import solver as sv

VERSION = "0.1.0"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVE = 3
EXIT_CHECK = 4


class ConfigInvalidError(ValueError):
    """Unreadable, inconsistent, or out-of-contract configuration."""


class SolveFailedError(RuntimeError):
    """The minimization diverged or exhausted its iteration budget."""


class CheckFailedError(RuntimeError):
    """At least one enabled check failed (reports were still written)."""


_KNOWN_CHECKS = (
    "defect-count", "windings", "bulk-monitor", "slope-fit",
    "pohozaev", "shift", "cell-monotone",
)

_BASE = {
    "domain": {
        "shape": "disk", "radius": "1.0", "center_x": "0.0", "center_y": "0.0",
        "resolution": "96",
    },
    "model": {
        "family": "ldg", "l1": "1.0", "l2": "0.0", "l3": "0.0",
        "bulk_a": "0.0", "bulk_b": "3.0", "bulk_c": "1.0",
    },
    "boundary": {"k": "1", "offset": "0.0"},
    "solve": {
        "eps_start": "0.2", "eps_end": "0.05", "rungs": "0",
        "ratio": "1.4142135623730951", "max_iter": "4000",
        "perturb": "0.0", "seed": "0", "init": "product-ansatz",
        "pilot": "32",
    },
    "metrics": {
        "mu": "0.5", "slope_tol": "0.05", "shift_tol": "0.03",
        "cell_slack": "0.01",
    },
    "run": {"recipe": "theorem-A", "checks": ""},
}

RECIPES = {
    "theorem-A": {
        "run": {"checks": "defect-count,windings,bulk-monitor"},
        "boundary": {"k": "2"},
        "domain": {"resolution": "128"},
        "solve": {"eps_start": "0.2", "eps_end": "0.03"},
    },
    "theorem-B": {
        "run": {"checks": "defect-count,bulk-monitor,slope-fit"},
        "domain": {"resolution": "128"},
        "solve": {"eps_start": "0.2", "eps_end": "0.025"},
    },
    "theorem-C": {
        "model": {"family": "gl"},
        "run": {"checks": "slope-fit"},
        "domain": {"resolution": "128"},
        "solve": {"eps_start": "0.2", "eps_end": "0.025"},
    },
    "pohozaev": {
        "run": {"checks": "pohozaev,bulk-monitor"},
        "solve": {"eps_start": "0.2", "eps_end": "0.05"},
    },
    "cell-problem": {
        "run": {"checks": "cell-monotone"},
        "cell": {"taus": "0.4,0.3,0.2,0.14,0.1", "beta": "0.0",
                 "resolution": "64"},
    },
}


# ----------------------------------------------------------------------------
# Config parsing


@dataclass
class RunConfig:
    """Validated, merged run description.  ``raw`` is the audit-trail echo."""

    raw: dict
    recipe: str
    shape: dom.Shape
    resolution: float
    family: str
    params: en.ModelParams | None
    k: int
    offset: float
    schedule: sv.SolveSchedule
    init: str
    seed: int
    pilot: int
    checks: tuple
    mu: float
    slope_tol: float
    shift_tol: float
    cell_slack: float
    out_dir: Path | None


def _merge(base: dict, *layers: dict) -> dict:
    out = {sec: dict(kv) for sec, kv in base.items()}
    for layer in layers:
        for sec, kv in layer.items():
            out.setdefault(sec, {}).update(kv)
    return out


def _read_ini(path) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            cp.read_file(f)
    except OSError as exc:
        raise ConfigInvalidError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigInvalidError(f"malformed config {path}: {exc}") from exc
    return {sec: dict(cp.items(sec)) for sec in cp.sections()}


def _build_shape(sec: dict) -> dom.Shape:
    kind = sec.get("shape", "disk").strip().lower()
    center = (float(sec.get("center_x", "0")), float(sec.get("center_y", "0")))
    try:
        if kind == "disk":
            return dom.Disk(radius=float(sec.get("radius", "1")), center=center)
        if kind == "ellipse":
            return dom.Ellipse(a=float(sec["a"]), b=float(sec["b"]),
                               center=center)
        if kind in ("rounded-rect", "rounded_rect", "roundedrect"):
            return dom.RoundedRect(
                width=float(sec["width"]), height=float(sec["height"]),
                corner_radius=float(sec["corner_radius"]), center=center,
            )
    except KeyError as exc:
        raise ConfigInvalidError(
            f"shape {kind!r} needs a [domain] entry {exc.args[0]!r}") from exc
    raise ConfigInvalidError(f"unknown shape {kind!r}")


def _build_schedule(sec: dict) -> sv.SolveSchedule:
    kw = dict(
        max_iter=int(sec.get("max_iter", "4000")),
        perturb=float(sec.get("perturb", "0.0")),
        seed=int(sec.get("seed", "0")),
    )
    if "tol_base" in sec:
        kw["tol_base"] = float(sec["tol_base"])
    if "eps_list" in sec:
        ladder = tuple(float(x) for x in sec["eps_list"].split(",") if x.strip())
        return sv.SolveSchedule(ladder, **kw)
    start = float(sec.get("eps_start", "0.2"))
    end = float(sec.get("eps_end", "0.05"))
    rungs = int(sec.get("rungs", "0"))
    if rungs > 0:
        return sv.SolveSchedule.between(start, end, rungs, **kw)
    return sv.SolveSchedule.geometric(start, end, ratio=float(sec.get("ratio", "1.4142135623730951")), **kw)


def parse_config(source, out_dir=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an INI path or a nested {section: {key: value}} dict.

    Overrides (same nested shape) win over the file, which wins over the
    recipe defaults.  Raises ConfigInvalidError on any contract violation.
    """
    user = dict(source) if isinstance(source, dict) else _read_ini(source)
    layers = [user] + ([overrides] if overrides else [])
    recipe = _BASE["run"]["recipe"]
    for layer in layers:
        recipe = layer.get("run", {}).get("recipe", recipe)
    if recipe not in RECIPES:
        raise ConfigInvalidError(
            f"unknown recipe {recipe!r}; choose from {sorted(RECIPES)}")
    raw = _merge(_BASE, RECIPES[recipe], *layers)
    raw["run"]["recipe"] = recipe

    try:
        shape = _build_shape(raw["domain"])
        resolution = float(raw["domain"].get("resolution", "96"))
        family = raw["model"].get("family", "ldg").strip().lower()
        if family not in ("ldg", "gl", "csh"):
            raise ConfigInvalidError(f"unknown model family {family!r}")
        schedule = _build_schedule(raw["solve"])
        k = int(raw["boundary"].get("k", "1"))
        if k < 0:
            raise ConfigInvalidError("boundary winding k must be >= 0")
        offset = float(raw["boundary"].get("offset", "0.0"))
        params = None
        if family == "ldg":
            bulk = en.ClassicBulk(
                a=float(raw["model"].get("bulk_a", "0")),
                b=float(raw["model"].get("bulk_b", "3")),
                c=float(raw["model"].get("bulk_c", "1")),
            )
            params = en.ModelParams(
                L1=float(raw["model"].get("l1", "1")),
                L2=float(raw["model"].get("l2", "0")),
                L3=float(raw["model"].get("l3", "0")),
                bulk=bulk,
                eps=schedule.eps_ladder[0],
            )
        checks = tuple(
            c.strip() for c in raw["run"].get("checks", "").split(",") if c.strip())
        for c in checks:
            if c not in _KNOWN_CHECKS:
                raise ConfigInvalidError(f"unknown check {c!r}")
        if "pohozaev" in checks and not isinstance(shape, dom.Disk):
            raise ConfigInvalidError(
                "NotADisk: the pohozaev recipe requires a disk domain")
        ldg_only = set(checks) & {"pohozaev", "shift", "cell-monotone"}
        if family != "ldg" and ldg_only:
            raise ConfigInvalidError(
                f"checks {sorted(ldg_only)} need the ldg family, not {family!r}")
        met = raw.get("metrics", {})
        out = out_dir or raw["run"].get("out")
        return RunConfig(
            raw=raw,
            recipe=recipe,
            shape=shape,
            resolution=resolution,
            family=family,
            params=params,
            k=k,
            offset=offset,
            schedule=schedule,
            init=raw["solve"].get("init", "product-ansatz"),
            seed=int(raw["solve"].get("seed", "0")),
            pilot=int(raw["solve"].get("pilot", "32")),
            checks=checks,
            mu=float(met.get("mu", "0.5")),
            slope_tol=float(met.get("slope_tol", "0.05")),
            shift_tol=float(met.get("shift_tol", "0.03")),
            cell_slack=float(met.get("cell_slack", "0.01")),
            out_dir=Path(out) if out else None,
        )
    except ConfigInvalidError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigInvalidError(str(exc)) from exc


# ----------------------------------------------------------------------------
# Execution


@dataclass
class RunResult:
    """In-memory outcome of one recipe execution."""

    report: dict
    field: object | None
    defects: object | None
    timings: list
    ok: bool


def _check(name: str, ok: bool, **extra) -> dict:
    entry = {"name": name, "pass": bool(ok)}
    for key in ("value", "target", "tol", "detail"):
        if key in extra and extra[key] is not None:
            entry[key] = extra[key]
    return entry


def _rung_row(rep: sv.RungReport) -> dict:
    return {
        "eps": float(rep.eps),
        "iterations": int(rep.iterations),
        "elastic": float(rep.energy.elastic),
        "bulk": float(rep.energy.bulk),
        "total": float(rep.energy.total),
        "grad_norm": float(rep.grad_norm),
        "converged": bool(rep.converged),
        "stalled": bool(rep.stalled),
    }


def _defects_block(dset: dfx.DefectSet) -> dict:
    return {
        "count": len(dset),
        "charge": int(dset.charge),
        "mu": float(dset.mu),
        "rho": float(dset.rho),
        "records": [
            {
                "x": float(r.position[0]), "y": float(r.position[1]),
                "winding": int(r.winding), "core_radius": float(r.core_radius),
                "min_pnorm": float(r.min_pnorm),
            }
            for r in dset.records
        ],
        "warnings": list(dset.warnings),
    }


def _execute_cell(cfg: RunConfig) -> RunResult:
    if cfg.params is None:
        raise ConfigInvalidError("cell-problem runs need the ldg family")
    sec = cfg.raw.get("cell", {})
    taus = tuple(float(x) for x in sec.get("taus", "0.4,0.3,0.2,0.14,0.1").split(","))
    beta = float(sec.get("beta", "0.0"))
    res = float(sec.get("resolution", "64"))
    t0 = time.perf_counter()
    out = rn.cell_problem_L(
        taus, cfg.params, resolution=res, beta=beta,
        max_iter=cfg.schedule.max_iter, seed=cfg.seed,
    )
    timings = [("cell-problem", time.perf_counter() - t0)]

    checks = []
    L = np.array(out.L_values)
    span = float(L.max() - L.min()) if L.size else 0.0
    # L is nondecreasing in tau, so along the descending-tau ladder it must
    # not increase (it approaches gamma from above)
    slack = cfg.cell_slack * max(span, 1e-30)
    rise = float(np.max(np.diff(L), initial=0.0))
    checks.append(_check(
        "cell-monotone", rise <= slack, value=rise, tol=slack,
        detail="largest increase of L along the descending-tau ladder",
    ))
    checks.append(_check(
        "cell-gamma-finite", math.isfinite(out.gamma), value=float(out.gamma)))
    ok = all(c["pass"] for c in checks)
    report = {
        "schema": 1,
        "version": VERSION,
        "recipe": cfg.recipe,
        "seed": cfg.seed,
        "family": cfg.family,
        "config": cfg.raw,
        "cell": {
            "taus": [float(t) for t in out.taus],
            "L": [float(v) for v in out.L_values],
            "gamma": float(out.gamma),
            "coeff": float(out.coeff),
            "exponent": float(out.exponent),
            "fit_residual": float(out.fit_residual),
            "beta": float(out.beta),
            "resolution": float(out.resolution),
        },
        "checks": checks,
        "ok": bool(ok),
    }
    return RunResult(report=report, field=None, defects=None,
                     timings=timings, ok=bool(ok))


def _run_pilot(cfg: RunConfig):
    """Solve the migration phase of a run on a coarse grid.

    Runs the prefix of the eps ladder that the coarse grid can resolve
    (eps >= 3h, at least one rung) from the configured cold start, with a
    generous iteration budget and no boundary polish.  The returned field
    carries the settled defect arrangement; the caller refines it onto the
    target grid.
    """
    grid = dom.build_grid(cfg.shape, cfg.pilot)
    ladder = tuple(e for e in cfg.schedule.eps_ladder if e >= 3.0 * grid.h)
    if not ladder:
        ladder = cfg.schedule.eps_ladder[:1]
    sched = replace(cfg.schedule, eps_ladder=ladder, pin_passes=0,
                    max_iter=max(cfg.schedule.max_iter, 20000))
    points = sv.default_seed_points(grid, cfg.k)
    if cfg.family == "ldg":
        bdata = dom.make_boundary_data(grid, cfg.params.s, cfg.k, cfg.offset)
        field = sv.init_field(grid, bdata, cfg.init, points=points,
                              eps=ladder[0], seed=cfg.seed)
        field, _ = sv.minimize(field, cfg.params.with_eps(ladder[-1]), sched)
    else:
        field = sv.init_vector_field(grid, cfg.k, cfg.offset, cfg.init,
                                     points=points, eps=ladder[0],
                                     seed=cfg.seed)
        if cfg.family == "gl":
            field, _ = sv.minimize_gl(field, sched)
        else:
            field, _ = sv.minimize_csh(field, sched)
    return field


def execute(cfg: RunConfig, detect_each_rung: bool = False,
            warm_field=None) -> RunResult:
    """Run a parsed config end to end; no files are written.

    Raises SolveFailedError if the descent diverges or a rung exhausts its
    budget while still moving.  Check failures do not raise — they are
    recorded in the report and reflected in ``ok``.  ``warm_field`` is a
    solved field from another grid of the same problem, transferred by
    interpolation instead of the configured cold init (used by resolution
    sweeps where each level polishes the previous one).
    """
    if "cell-monotone" in cfg.checks:
        return _execute_cell(cfg)

    timings = []
    warnings = []
    t0 = time.perf_counter()
    try:
        grid = dom.build_grid(cfg.shape, cfg.resolution)
    except dom.ResolutionTooCoarseError as exc:
        raise ConfigInvalidError(str(exc)) from exc
    timings.append(("grid", time.perf_counter() - t0))

    eps_min = cfg.schedule.eps_ladder[-1]
    if eps_min < 3.0 * grid.h:
        warnings.append(
            f"eps_end={eps_min:g} below 3h={3.0 * grid.h:g}; core under-resolved")

    if warm_field is None and 0 < cfg.pilot < cfg.resolution:
        # defect migration from the cold seeds is the slow phase; do it on a
        # cheap grid and hand the basin to the target grid by interpolation
        t0 = time.perf_counter()
        try:
            warm_field = _run_pilot(cfg)
        except dom.ResolutionTooCoarseError:
            pass
        timings.append(("pilot", time.perf_counter() - t0))

    points = sv.default_seed_points(grid, cfg.k)
    t0 = time.perf_counter()
    if warm_field is not None:
        field = sv.refine_field(warm_field, grid, k=cfg.k, offset=cfg.offset)
    elif cfg.family == "ldg":
        bdata = dom.make_boundary_data(grid, cfg.params.s, cfg.k, cfg.offset)
        field = sv.init_field(grid, bdata, cfg.init, points=points,
                              eps=cfg.schedule.eps_ladder[0], seed=cfg.seed)
    else:
        field = sv.init_vector_field(grid, cfg.k, cfg.offset, cfg.init,
                                     points=points,
                                     eps=cfg.schedule.eps_ladder[0],
                                     seed=cfg.seed)
    timings.append(("init", time.perf_counter() - t0))

    report_sv = sv.SolveReport()
    rung_rows = []
    poh_blocks = []
    t0 = time.perf_counter()
    try:
        for irung, eps in enumerate(cfg.schedule.eps_ladder):
            last = irung == len(cfg.schedule.eps_ladder) - 1
            # boundary polish only pays off on the state that gets measured
            sub = replace(cfg.schedule, eps_ladder=(float(eps),),
                          pin_passes=cfg.schedule.pin_passes if last else 0)
            if cfg.family == "ldg":
                field, rep = sv.minimize(field, cfg.params.with_eps(eps), sub)
            elif cfg.family == "gl":
                field, rep = sv.minimize_gl(field, sub)
            else:
                field, rep = sv.minimize_csh(field, sub)
            report_sv.rungs.extend(rep.rungs)
            row = _rung_row(rep.rungs[-1])
            if detect_each_rung:
                try:
                    dset = dfx.detect_defects(field, mu=cfg.mu)
                    row["defects"] = len(dset)
                    row["charge"] = int(dset.charge)
                except dfx.ChargeMismatchError:
                    row["defects"] = -1
                    row["charge"] = None
            if "pohozaev" in cfg.checks:
                poh = diag.pohozaev_check(field, cfg.params.with_eps(eps))
                poh_blocks.append({
                    "eps": float(eps),
                    "inequality_lhs": poh.inequality_lhs,
                    "inequality_rhs": poh.inequality_rhs,
                    "inequality_ok": poh.inequality_ok,
                    "residual": poh.residual,
                    "residual_rel": poh.residual_rel,
                    "bound_rhs": poh.bound_rhs,
                    "term_mixed": poh.term_mixed,
                })
            rung_rows.append(row)
    except sv.DivergedError as exc:
        raise SolveFailedError(str(exc)) from exc
    timings.append(("solve", time.perf_counter() - t0))

    final = report_sv.final
    if not (final.converged or final.stalled):
        raise SolveFailedError(
            f"rung eps={final.eps:g} exhausted max_iter={cfg.schedule.max_iter} "
            f"with grad_norm={final.grad_norm:.3e}")

    t0 = time.perf_counter()
    dset = None
    mismatch = None
    try:
        dset = dfx.detect_defects(field, mu=cfg.mu)
    except dfx.ChargeMismatchError as exc:
        mismatch = str(exc)
    well = None
    if dset is not None:
        well = dfx.well_metrics(field, dset, eps=eps_min)
    timings.append(("defects", time.perf_counter() - t0))

    monitor = diag.bulk_bound_monitor(report_sv)
    diagnostics = {
        "bulk_monitor": {
            "rows": [[e, b] for e, b in monitor.rows],
            "violations": list(monitor.violations),
        },
    }
    if poh_blocks:
        diagnostics["pohozaev"] = poh_blocks

    checks = []
    for name in cfg.checks:
        if name == "defect-count":
            ok = dset is not None and len(dset) == cfg.k
            checks.append(_check(
                name, ok, value=(len(dset) if dset else None), target=cfg.k,
                detail=mismatch))
        elif name == "windings":
            ok = dset is not None and all(r.winding == 1 for r in dset.records)
            checks.append(_check(
                name, ok,
                value=[int(r.winding) for r in dset.records] if dset else None,
                target=1, detail=mismatch))
        elif name == "bulk-monitor":
            checks.append(_check(
                name, monitor.ok, value=monitor.max_entry(),
                tol="50% growth per rung",
                detail="; ".join(monitor.violations) or None))
        elif name == "slope-fit":
            samples = [(row["eps"], row["total"]) for row in rung_rows]
            if cfg.family == "ldg":
                target = ("ldg", cfg.k, cfg.params.s,
                          cfg.params.L1, cfg.params.L2, cfg.params.L3)
            else:
                target = (cfg.family, cfg.k)
            try:
                fit = diag.fit_energy_asymptotics(samples, target)
            except diag.InsufficientSamplesError as exc:
                checks.append(_check(name, False, detail=str(exc)))
            else:
                diagnostics["fit"] = {
                    "slope": fit.slope, "intercept": fit.intercept,
                    "target": fit.target, "rel_slope_error": fit.rel_slope_error,
                    "max_dev": fit.max_dev,
                }
                checks.append(_check(
                    name, fit.rel_slope_error <= cfg.slope_tol,
                    value=fit.slope, target=fit.target, tol=cfg.slope_tol))
        elif name == "pohozaev":
            ok = bool(poh_blocks) and all(b["inequality_ok"] for b in poh_blocks)
            margin = min((b["inequality_lhs"] - b["inequality_rhs"]
                          for b in poh_blocks), default=float("nan"))
            checks.append(_check(name, ok, value=margin, target=">= 0",
                                 detail="smallest lhs - rhs margin on the ladder"))
        elif name == "shift":
            sh = diag.corollary_shift_check(field, cfg.params.with_eps(eps_min))
            diagnostics["shift"] = {
                "G": sh.G, "F": sh.F, "shift": sh.shift, "expected": sh.expected,
            }
            checks.append(_check(
                name, sh.rel_error <= cfg.shift_tol, value=sh.shift,
                target=sh.expected, tol=cfg.shift_tol))

    ok = all(c["pass"] for c in checks)
    report = {
        "schema": 1,
        "version": VERSION,
        "recipe": cfg.recipe,
        "seed": cfg.seed,
        "family": cfg.family,
        "config": cfg.raw,
        "warnings": warnings,
        "solve": {
            "rungs": rung_rows,
            "converged": bool(final.converged),
            "any_stalled": bool(report_sv.any_stalled),
        },
        "defects": _defects_block(dset) if dset is not None else None,
        "well": {
            "sup_p": well.sup_p, "sup_r": well.sup_r,
            "bad_area": {f"{m:g}": a for m, a in sorted(well.bad_area.items())},
            "rho": well.rho, "eps": well.eps,
        } if well is not None else None,
        "diagnostics": diagnostics,
        "checks": checks,
        "ok": bool(ok),
    }
    return RunResult(report=report, field=field, defects=dset,
                     timings=timings, ok=bool(ok))


# ----------------------------------------------------------------------------
# Artifacts


def export_field_csv(field, path) -> None:
    """All nodes in row-major order with header x,y,p1,p2,r."""
    grid = field.grid
    u = field.u
    has_r = u.shape[0] > 2
    with open(path, "w") as f:
        f.write("x,y,p1,p2,r\n")
        for i in range(grid.nx):
            x = float(grid.xs[i])
            for j in range(grid.ny):
                r = float(u[2, i, j]) if has_r else 0.0
                f.write(f"{x!r},{float(grid.ys[j])!r},{float(u[0, i, j])!r},"
                        f"{float(u[1, i, j])!r},{r!r}\n")


def _write_report(report: dict, out: Path) -> None:
    out.joinpath("report.json").write_text(json.dumps(report, indent=2) + "\n")


def _write_timings(timings, out: Path) -> None:
    lines = [f"{label}\t{secs:.3f}s" for label, secs in timings]
    out.joinpath("timings.txt").write_text("\n".join(lines) + "\n")


def _print_checks(report: dict) -> None:
    for c in report.get("checks", []):
        status = "PASS" if c["pass"] else "FAIL"
        extras = []
        if "value" in c:
            extras.append(f"value={c['value']}")
        if "target" in c:
            extras.append(f"target={c['target']}")
        if "tol" in c:
            extras.append(f"tol={c['tol']}")
        if "detail" in c:
            extras.append(str(c["detail"]))
        print(f"{status} {c['name']}" + (f" ({', '.join(extras)})" if extras else ""))


def run(source, out_dir=None, overrides=None) -> int:
    """Execute a config file (or dict) and write artifacts; returns exit code."""
    try:
        cfg = parse_config(source, out_dir=out_dir, overrides=overrides)
    except ConfigInvalidError as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG
    out = cfg.out_dir or Path("runs") / cfg.recipe
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = execute(cfg)
    except ConfigInvalidError as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG
    except SolveFailedError as exc:
        print(f"solve failed: {exc}")
        return EXIT_SOLVE
    _write_report(result.report, out)
    _write_timings(result.timings, out)
    if result.field is not None:
        export_field_csv(result.field, out / "field.csv")
    if result.defects is not None:
        dfx.export_defect_csv(result.defects, out / "defects.csv")
    if "cell" in result.report:
        taus = result.report["cell"]["taus"]
        Ls = result.report["cell"]["L"]
        with open(out / "cell.csv", "w") as f:
            f.write("tau,L\n")
            for tau, L in zip(taus, Ls):
                f.write(f"{tau!r},{L!r}\n")
    _print_checks(result.report)
    return EXIT_OK if result.ok else EXIT_CHECK


# ----------------------------------------------------------------------------
# Sweeps


def _sweep_eps(cfg: RunConfig, start: float, stop: float, rungs: int):
    if not (start > stop > 0):
        raise ConfigInvalidError("eps sweep needs start > stop > 0")
    schedule = sv.SolveSchedule.between(
        start, stop, rungs, max_iter=cfg.schedule.max_iter,
        perturb=cfg.schedule.perturb, seed=cfg.schedule.seed)
    cfg = replace(cfg, schedule=schedule,
                  params=cfg.params.with_eps(start) if cfg.params else None)
    result = execute(cfg, detect_each_rung=True)
    rows = [
        [row["eps"], row["elastic"], row["bulk"], row["total"],
         row["iterations"], row.get("defects"), row.get("charge")]
        for row in result.report["solve"]["rungs"]
    ]
    header = "eps,elastic,bulk,total,iterations,defects,charge"
    fit_block = None
    samples = [(row["eps"], row["total"]) for row in result.report["solve"]["rungs"]]
    if cfg.family == "ldg":
        target = ("ldg", cfg.k, cfg.params.s, cfg.params.L1, cfg.params.L2,
                  cfg.params.L3)
    else:
        target = (cfg.family, cfg.k)
    try:
        fit = diag.fit_energy_asymptotics(samples, target)
        fit_block = {
            "slope": fit.slope, "intercept": fit.intercept,
            "target": fit.target, "rel_slope_error": fit.rel_slope_error,
            "max_dev": fit.max_dev,
        }
    except diag.InsufficientSamplesError as exc:
        fit_block = {"error": str(exc)}
    return result, rows, header, fit_block


def _sweep_k(cfg: RunConfig, start: float, stop: float, rungs: int):
    k0, k1 = int(round(start)), int(round(stop))
    step = 1 if k1 >= k0 else -1
    values = list(range(k0, k1 + step, step))
    rows, timings, reports = [], [], []
    ok = True
    for k in values:
        sub = parse_config(cfg.raw, overrides={"boundary": {"k": str(k)}})
        sub = replace(sub, out_dir=cfg.out_dir)
        result = execute(sub)
        timings.extend((f"k={k}:{lbl}", t) for lbl, t in result.timings)
        blk = result.report["defects"]
        rows.append([
            k, result.report["solve"]["rungs"][-1]["total"],
            blk["count"] if blk else None, blk["charge"] if blk else None,
        ])
        reports.append({"k": k, "ok": result.ok, "checks": result.report["checks"]})
        ok = ok and result.ok
    return rows, "k,total,defects,charge", reports, timings, ok


def _sweep_resolution(cfg: RunConfig, start: float, stop: float, rungs: int):
    values = np.geomspace(start, stop, rungs)
    values = [int(round(v)) for v in values]
    rows, timings = [], []
    warm = None
    eps_end = cfg.schedule.eps_ladder[-1]
    for res in values:
        over = {"domain": {"resolution": str(res)}}
        if warm is not None:
            # the coarse minimizer already found the basin; only the final
            # eps needs polishing on the finer grid
            over["solve"] = {"eps_start": repr(eps_end), "eps_end": repr(eps_end)}
        sub = parse_config(cfg.raw, overrides=over)
        sub = replace(sub, out_dir=cfg.out_dir)
        result = execute(sub, warm_field=warm)
        warm = result.field
        timings.extend((f"res={res}:{lbl}", t) for lbl, t in result.timings)
        rows.append([res, result.report["solve"]["rungs"][-1]["total"]])
    ratios = []
    for i in range(len(rows) - 2):
        d1 = rows[i][1] - rows[i + 1][1]
        d2 = rows[i + 1][1] - rows[i + 2][1]
        ratios.append(d1 / d2 if d2 != 0 else float("inf"))
    return rows, "resolution,total", ratios, timings


def sweep(source, param: str, start: float, stop: float, rungs: int,
          out_dir=None) -> int:
    """Parameter sweep driver for eps, k, or resolution."""
    try:
        cfg = parse_config(source, out_dir=out_dir)
        if param not in ("eps", "k", "resolution"):
            raise ConfigInvalidError(
                f"sweep parameter must be eps, k, or resolution (got {param!r})")
        if rungs < 1:
            raise ConfigInvalidError("sweep needs at least one rung")
    except ConfigInvalidError as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG

    out = cfg.out_dir or Path("runs") / f"sweep-{param}"
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "schema": 1, "version": VERSION, "recipe": cfg.recipe,
        "seed": cfg.seed, "sweep": {"param": param, "from": start,
                                    "to": stop, "rungs": rungs},
        "config": cfg.raw,
    }
    try:
        if param == "eps":
            result, rows, header, fit_block = _sweep_eps(cfg, start, stop, rungs)
            report["rows"] = rows
            report["fit"] = fit_block
            report["checks"] = result.report["checks"]
            report["ok"] = result.ok
            timings = result.timings
        elif param == "k":
            rows, header, sub_reports, timings, ok = _sweep_k(cfg, start, stop, rungs)
            report["rows"] = rows
            report["runs"] = sub_reports
            report["checks"] = []
            report["ok"] = ok
        else:
            rows, header, ratios, timings = _sweep_resolution(cfg, start, stop, rungs)
            report["rows"] = rows
            report["richardson_ratios"] = ratios
            report["checks"] = []
            report["ok"] = True
    except ConfigInvalidError as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG
    except SolveFailedError as exc:
        print(f"solve failed: {exc}")
        return EXIT_SOLVE

    with open(out / "sweep.csv", "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join("" if v is None else repr(v) for v in row) + "\n")
    _write_report(report, out)
    _write_timings(timings, out)
    _print_checks(report)
    return EXIT_OK if report["ok"] else EXIT_CHECK


# ----------------------------------------------------------------------------
# W landscape


def wmap(source, k: int | None = None, scan: int | None = None,
         out_dir=None, workers: int | None = None) -> int:
    """Scan or search the renormalized energy over defect configurations."""
    try:
        cfg = parse_config(source, out_dir=out_dir)
        k = cfg.k if k is None else int(k)
        if k < 1:
            raise ConfigInvalidError("wmap needs k >= 1")
        grid = dom.build_grid(cfg.shape, cfg.resolution)
        s = cfg.params.s if cfg.params is not None else 2.0
        bdata = dom.make_boundary_data(grid, s, k, cfg.offset)
    except (ConfigInvalidError, dom.ResolutionTooCoarseError) as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG

    out = cfg.out_dir or Path("runs") / "wmap"
    out.mkdir(parents=True, exist_ok=True)
    wsec = cfg.raw.get("wmap", {})
    scan = int(wsec.get("scan", "16")) if scan is None else int(scan)

    t0 = time.perf_counter()
    rows = None
    if k <= 2:
        res = rn.scan_W(bdata, grid, k=k, scan=scan, workers=workers)
        config, W = res.config, res.W
        rows = res.rows
        cells = {"cell": float(res.cell), "refined_cell": float(res.refined_cell)}
        rn.export_wmap_csv(res, out / "wmap.csv")
    else:
        config, W = rn.argmin_W(k, bdata, grid, search="auto", scan=scan,
                                workers=workers, seed=cfg.seed)
        cells = {}
    timings = [("wmap", time.perf_counter() - t0)]

    report = {
        "schema": 1, "version": VERSION, "recipe": cfg.recipe, "seed": cfg.seed,
        "config": cfg.raw,
        "wmap": {
            "k": int(k), "scan": int(scan),
            "argmin": [[float(x), float(y)] for x, y in config.points],
            "W": float(W),
            **cells,
            "rows": len(rows) if rows is not None else 0,
        },
        "checks": [_check("wmap-finite", math.isfinite(W), value=float(W))],
    }
    report["ok"] = all(c["pass"] for c in report["checks"])
    _write_report(report, out)
    _write_timings(timings, out)
    _print_checks(report)
    return EXIT_OK if report["ok"] else EXIT_CHECK
