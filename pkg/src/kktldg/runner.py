"""Time integration driver and on-disk run artifacts."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .diagnostics import (
    StepRecord,
    change_rate,
    convergence_table,
    discrete_entropy,
    error_norms,
    format_float,
    max_u,
    min_u,
    timestep_bound,
    total_mass,
)
from .dirk import StepRejected, TimeController, TimestepUnderflow, advance_step, control_timestep, tableau
from .kkt import ConstraintSet, project_initial
from .ldg import LDGDiscretization
from .mesh import build_mesh
from .model import preset

STATUS_OK = "ok"
STATUS_SOLVER_FAILURE = "solver_failure"
STATUS_BREAKDOWN = "breakdown"
EXIT_CODES = {STATUS_OK: 0, STATUS_SOLVER_FAILURE: 3, STATUS_BREAKDOWN: 4}


@dataclass
class RunResult:
    config: RunConfig
    status: str
    message: str
    records: list
    U: np.ndarray
    disc: LDGDiscretization
    time: float
    rejected: int = 0
    errors: tuple | None = None
    summary: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]


def build_discretization(cfg: RunConfig) -> LDGDiscretization:
    p = preset(cfg.preset, cfg.mass)
    problem = replace(p.problem, u_min=cfg.u_min)
    mesh = build_mesh(problem.dim, problem.bounds, cfg.elements, problem.boundary)
    return LDGDiscretization(
        mesh,
        problem,
        cfg.degree,
        flux=cfg.flux,
        quad_points=cfg.quad_points,
        constraint_points=cfg.constraint_points,
        admissibility=cfg.admissibility,
        quadrature=cfg.quadrature,
    )


def _record(disc, step, t, tau, U, n_active=0, lam_max=0.0, iters=0, restarts=0, rate=0.0, defect=0.0):
    return StepRecord(
        step=step,
        time=t,
        tau=tau,
        entropy=discrete_entropy(disc, U),
        mass=total_mass(disc, U),
        min_u=min_u(disc, U),
        max_u=max_u(disc, U),
        n_active=n_active,
        lam_max=lam_max,
        newton_iterations=iters,
        restarts=restarts,
        change_rate=rate,
        stiff_defect=defect,
    )


def run(config: RunConfig, write: bool = True) -> RunResult:
    """Integrate one configuration to its final time; writes artifacts when ``output_dir`` is set."""
    cfg = config.resolved()
    disc = build_discretization(cfg)
    tab = tableau(cfg.dirk_order)
    cs = ConstraintSet.from_discretization(disc, cfg.u_min) if cfg.limiter else None
    init = project_initial(disc, constraints=cs, limiter=cfg.limiter, tol=cfg.newton_tol)
    U = init.U
    lam = None
    t, T = 0.0, cfg.final_time
    ctrl = TimeController(tau=cfg.tau_max, tau_max=cfg.tau_max, tau_min=cfg.tau_min)
    records = [_record(disc, 0, 0.0, 0.0, U, n_active=init.n_active)]
    status, message = STATUS_OK, ""
    rejected = 0
    step = 0
    while T - t > 1e-12 * T:
        tau = min(ctrl.tau, T - t)
        try:
            # overflow in rejected trial iterates is handled by the finiteness checks
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                U_new, lam_new, rep = advance_step(
                    disc,
                    U,
                    t,
                    tau,
                    tab,
                    cs,
                    lam=lam,
                    tol=cfg.newton_tol,
                    max_iter=cfg.newton_max_iter,
                    line_search=cfg.newton_line_search,
                )
        except StepRejected as exc:
            rejected += 1
            try:
                control_timestep(ctrl, accepted=False)
            except TimestepUnderflow as under:
                status = STATUS_SOLVER_FAILURE if cfg.limiter else STATUS_BREAKDOWN
                message = f"t = {t:.6g}: {under}; last failure: {exc}"
                break
            continue
        values = disc.at_constraint_points(U_new)
        if not np.all(np.isfinite(U_new)) or np.abs(values).max() > cfg.blowup_threshold:
            status = STATUS_BREAKDOWN
            message = f"t = {t + tau:.6g}: solution exceeded {cfg.blowup_threshold:g} or became non-finite"
            break
        step += 1
        rate = change_rate(disc, U_new, U, tau)
        t = t + tau if T - (t + tau) > 1e-12 * T else T
        U, lam = U_new, lam_new
        records.append(
            _record(
                disc,
                step,
                t,
                tau,
                U,
                n_active=rep.active_counts[-1],
                lam_max=rep.lam_max,
                iters=sum(rep.newton_iterations),
                restarts=ctrl.restarts,
                rate=rate,
                defect=rep.stiff_defect,
            )
        )
        control_timestep(ctrl, accepted=True)

    errors = None
    if disc.problem.exact is not None:
        errors = error_norms(disc, U, t)
    res = RunResult(cfg, status, message, records, U, disc, t, rejected, errors)
    res.summary = _summary(res)
    if write and cfg.output_dir:
        write_artifacts(res, Path(cfg.output_dir))
    return res


def _summary(res: RunResult) -> dict:
    cfg, recs = res.config, res.records
    m0, m1 = recs[0].mass, recs[-1].mass
    proven = cfg.dirk_order == 1 and res.disc.mesh.boundary != "dirichlet"
    out = {
        "status": res.status,
        "message": res.message or "none",
        "final_time": res.time,
        "steps": len(recs) - 1,
        "rejected_steps": res.rejected,
        "mass_initial": m0,
        "mass_final": m1,
        "mass_drift": abs(m1 - m0) / max(abs(m0), 1e-300),
        "min_u": min(r.min_u for r in recs),
        "max_u": max(r.max_u for r in recs),
        "entropy_initial": recs[0].entropy,
        "entropy_final": recs[-1].entropy,
        "entropy_regime": "proven" if proven else "unproven",
        "sigma": res.disc.ops.sigma,
    }
    if res.errors is not None:
        out["error_linf"], out["error_l1"], out["error_l2"] = res.errors
    return out


def tau_bound_summary(res: RunResult) -> dict:
    sigma, c, bound = timestep_bound(res.disc, res.U, res.time)
    return {"sigma": sigma, "c_estimate": c, "tau_bound": bound}


# --- artifacts -----------------------------------------------------------------

STEPS_HEADER = "# kktldg steps v1"


def steps_csv(records) -> str:
    buf = io.StringIO()
    buf.write(STEPS_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(StepRecord.columns())
    for r in records:
        w.writerow([format_float(v) if isinstance(v, float) else v for v in r.values()])
    return buf.getvalue()


def solution_csv(disc: LDGDiscretization, U) -> str:
    buf = io.StringIO()
    buf.write("# kktldg solution v1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["element"] + [f"c{j}" for j in range(disc.nk)])
    for e, row in enumerate(disc.local(U)):
        w.writerow([e] + [format_float(v) for v in row])
    return buf.getvalue()


def samples_csv(disc: LDGDiscretization, U, per_element: int = 5) -> str:
    s = np.linspace(-1.0, 1.0, per_element)
    grid = s[:, None] if disc.dim == 1 else np.array([(a, b) for b in s for a in s])
    x = disc.mesh.map_points(grid).reshape(-1, disc.dim)
    vals = disc.evaluate(U, grid).ravel()
    buf = io.StringIO()
    buf.write("# kktldg samples v1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{a}" for a in range(disc.dim)] + ["u"])
    for xi, v in zip(x, vals):
        w.writerow([format_float(c) for c in xi] + [format_float(v)])
    return buf.getvalue()


def summary_text(summary: dict) -> str:
    lines = ["# kktldg summary v1"]
    for k, v in summary.items():
        lines.append(f"{k} = {format_float(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def write_artifacts(res: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(res.config.manifest())
    (out / "steps.csv").write_text(steps_csv(res.records))
    (out / "solution.csv").write_text(solution_csv(res.disc, res.U))
    (out / "samples.csv").write_text(samples_csv(res.disc, res.U))
    (out / "summary.txt").write_text(summary_text(res.summary))
    marker = out / "FAILED"
    if res.status != STATUS_OK:
        marker.write_text(f"{res.status}: {res.message}\n")
    elif marker.exists():
        marker.unlink()


def run_table(config: RunConfig, meshes, out_dir: str | None = None):
    """Convergence study over doubling element counts; returns (table, results)."""
    results = []
    for m in meshes:
        sub = None if out_dir is None else str(Path(out_dir) / f"M{m}")
        cfg = replace(config, elements=(int(m),), tau_max=None, tau_min=None, output_dir=sub)
        res = run(cfg)
        if res.errors is None:
            raise ValueError("convergence tables need a preset with an exact solution")
        results.append(res)
    table = convergence_table(
        results[0].config.degree,
        meshes,
        [r.errors[0] for r in results],
        [r.errors[1] for r in results],
        [r.records[-1].min_u for r in results],
    )
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "table.csv").write_text(table.to_csv())
    return table, results


# --- comparison ----------------------------------------------------------------


def read_csv_table(path: Path):
    rows = [r for r in csv.reader(l for l in path.read_text().splitlines() if not l.startswith("#"))]
    return rows[0], rows[1:]


def compare_runs(dir_a, dir_b) -> dict:
    """Maximum absolute per-column deltas of the step records, solution and summary numbers."""
    a, b = Path(dir_a), Path(dir_b)
    report = {}
    for name in ("steps.csv", "solution.csv"):
        ha, ra = read_csv_table(a / name)
        hb, rb = read_csv_table(b / name)
        if ha != hb:
            raise ValueError(f"{name}: column headers differ")
        if name == "solution.csv" and len(ra) != len(rb):
            raise ValueError("solution.csv: incompatible grids")
        n = min(len(ra), len(rb))
        for j, col in enumerate(ha):
            va = np.array([float(r[j]) for r in ra[:n]])
            vb = np.array([float(r[j]) for r in rb[:n]])
            report[f"{name}:{col}"] = float(np.abs(va - vb).max()) if n else 0.0
        report[f"{name}:rows"] = abs(len(ra) - len(rb))
    sa, sb = _read_summary(a / "summary.txt"), _read_summary(b / "summary.txt")
    for k in sorted(set(sa) & set(sb)):
        try:
            report[f"summary:{k}"] = abs(float(sa[k]) - float(sb[k]))
        except ValueError:
            report[f"summary:{k}"] = 0.0 if sa[k] == sb[k] else math.nan
    return report


def _read_summary(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        if line.startswith("#") or "=" not in line:
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out
