"""Batch runner: ``loewner-control <task> --scenario file.yaml [--out dir]``.

Each run writes ``<name>.<task>.report.json`` plus one ``<name>.<task>.<table>.csv``
per table. Exit codes: 0 all checks passed, 1 a check failed (or numerics
broke down), 2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np
import yaml

from . import control as ctl
from . import holomap as hm
from . import loewner as lw
from . import variation as var
from .errors import DomainError, LoewnerError

log = logging.getLogger("loewner_control")

TASKS = ("flow", "map", "vary", "hamiltonian", "pontryagin", "pommerenke", "screen", "membership")
EXIT_OK, EXIT_CHECK, EXIT_INPUT = 0, 1, 2
LOG_ENV = "LOEWNER_CONTROL_LOG"


@dataclass
class Scenario:
    name: str
    task: str
    dimension: int
    field: Optional[lw.HerglotzField] = None
    functional: Optional[ctl.LinearFunctional] = None
    family: ctl.ControlFamily = dc_field(default_factory=ctl.ControlFamily)
    params: dict = dc_field(default_factory=dict)
    atol: float = lw.DEFAULT_ATOL
    rtol: float = lw.DEFAULT_RTOL


def _time(x) -> float:
    if isinstance(x, str) and x.strip().lower() in ("inf", "infinity", ".inf"):
        return math.inf
    return float(x)


def _points(raw, n: int) -> np.ndarray:
    """Each point is a list of n coordinates (number or [re, im]); bare numbers when n = 1."""
    pts = []
    for p in raw:
        p = p if isinstance(p, list) else [p]
        if len(p) != n:
            raise DomainError(f"point {p} does not have {n} coordinates")
        pts.append([hm._cplx(x) for x in p])
    Z, _ = hm.as_points(np.array(pts, dtype=complex), n)
    return Z


def load_scenario(path: Path, task: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        rec = yaml.safe_load(fh)
    if not isinstance(rec, Mapping):
        raise DomainError("scenario must be a mapping")
    declared = rec.get("task", task)
    if declared != task:
        raise DomainError(f"scenario declares task {declared!r} but {task!r} was requested")
    tol = rec.get("tolerances", {}) or {}
    atol, rtol = float(tol.get("atol", lw.DEFAULT_ATOL)), float(tol.get("rtol", lw.DEFAULT_RTOL))
    for k, v in tol.items():
        if float(v) <= 0:
            raise DomainError(f"tolerance {k} must be > 0")
    G = lw.field_from_dict(rec["field"]) if "field" in rec else None
    n = int(rec.get("dimension", G.dimension if G else 1))
    if G is not None and G.dimension != n:
        raise DomainError(f"field has dimension {G.dimension}, scenario says {n}")
    L = ctl.functional_from_dict(rec["functional"]) if "functional" in rec else None
    return Scenario(
        name=str(rec.get("name", path.stem)),
        task=task,
        dimension=n,
        field=G,
        functional=L,
        family=ctl.family_from_dict(rec.get("family")),
        params=dict(rec.get("params", {}) or {}),
        atol=atol,
        rtol=rtol,
    )


def _need(sc: Scenario, *names: str) -> None:
    for name in names:
        if getattr(sc, name) is None:
            raise DomainError(f"task {sc.task!r} needs a {name!r} entry")


# ------------------------------------------------------------------ outputs


def _num(x) -> str:
    return format(float(x), ".17g")


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class Outcome:
    passed: bool
    report: dict
    tables: dict[str, tuple[list[str], list[list]]] = dc_field(default_factory=dict)


def write_outputs(sc: Scenario, out: Path, outcome: Outcome) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{sc.name}.{sc.task}"
    written = []
    report = {"name": sc.name, "task": sc.task, "passed": outcome.passed, **outcome.report}
    p = out / f"{stem}.report.json"
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(report), fh, indent=2)
        fh.write("\n")
    written.append(p)
    for table, (header, rows) in outcome.tables.items():
        p = out / f"{stem}.{table}.csv"
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
        written.append(p)
    return written


# -------------------------------------------------------------------- tasks


def _task_flow(sc: Scenario, threads: int) -> Outcome:
    _need(sc, "field")
    s = float(sc.params.get("s", 0.0))
    times = np.atleast_1d(sc.params.get("t", 1.0)).astype(float)
    Z = _points(sc.params["points"], sc.dimension)
    rows, steps = [], []
    for t in times:
        res = lw.integrate_flow(sc.field, s, float(t), Z, sc.atol, sc.rtol)
        steps.append(res.steps_taken)
        for i, (v, J) in enumerate(zip(res.values, res.jacobians)):
            for k in range(sc.dimension):
                rows.append([float(t), i, k, v[k].real, v[k].imag, float(np.linalg.norm(J))])
    header = ["t", "point", "component", "re", "im", "jacobian_norm"]
    return Outcome(True, {"s": s, "times": times, "steps": steps}, {"flow": (header, rows)})


def _task_map(sc: Scenario, threads: int) -> Outcome:
    _need(sc, "field")
    s = float(sc.params.get("s", 0.0))
    Z = _points(sc.params["points"], sc.dimension) if "points" in sc.params else None
    degree = sc.params.get("degree")
    lim = lw.scaled_limit(
        sc.field, s, points=Z, degree=int(degree) if degree else None,
        tol=float(sc.params.get("tol", 1e-10)), atol=sc.atol, rtol=sc.rtol,
    )
    tables = {}
    if Z is not None:
        rows = [[i, k, v[k].real, v[k].imag] for i, v in enumerate(lim.values) for k in range(sc.dimension)]
        tables["values"] = (["point", "component", "re", "im"], rows)
    if lim.jet is not None:
        rows = [[k, " ".join(map(str, a)), c.real, c.imag] for (k, a), c in sorted(lim.jet.terms().items())]
        tables["coefficients"] = (["component", "alpha", "re", "im"], rows)
    report = {"s": s, "horizon": lim.horizon, "truncation_bound": lim.truncation_bound, "steps": lim.steps_taken}
    return Outcome(True, report, tables)


def _task_vary(sc: Scenario, threads: int) -> Outcome:
    _need(sc, "field")
    p = sc.params
    h = hm.descriptor_from_dict(p["needle"])
    T = float(p["T"])
    Z = _points(p["points"], sc.dimension)
    ladder = tuple(float(e) for e in p.get("ladder", var.DEFAULT_LADDER))
    times = p.get("t", T)
    rows, reports, ok = [], [], True
    for t in map(_time, times if isinstance(times, list) else [times]):
        rep = var.verify_variation(
            sc.field, T, h, t, Z, ladder=ladder,
            threshold=float(p.get("threshold", var.DECAY_THRESHOLD)), threads=threads,
        )
        terminal_ok = rep.normalized_terminal_residual <= float(p.get("terminal_tol", 1e-3))
        ok = ok and rep.passed and terminal_ok
        for i, (e, r) in enumerate(zip(rep.ladder, rep.residuals)):
            ratio = rep.decay_ratios[i - 1] if i else float("nan")
            rows.append([t, e, r, ratio])
        reports.append({
            "t": t, "passed": rep.passed, "terminal_ok": terminal_ok,
            "normalized_terminal_residual": rep.normalized_terminal_residual,
            "max_decay_ratio": max(rep.decay_ratios, default=0.0), "threshold": rep.threshold,
        })
    return Outcome(ok, {"T": T, "runs": reports}, {"ladder": (["t", "eps", "residual", "ratio"], rows)})


def _scan_rows(scan: ctl.HamiltonianScan, n: int) -> tuple[list[str], list[list]]:
    header = ["t", "m", "active"] + (["zeta_re", "zeta_im"] + [f"u{k}_{p}" for k in range(n) for p in ("re", "im")]
                                     if "zeta" in scan.maximizers[0] else ["member"])
    rows = []
    for t, m, a, arg in zip(scan.t_grid, scan.m_values, scan.active_values, scan.maximizers):
        if "zeta" in arg:
            extra = [arg["zeta"].real, arg["zeta"].imag] + [float(getattr(x, p)) for x in arg["u"] for p in ("real", "imag")]
        else:
            extra = [arg["index"]]
        rows.append([t, m, a] + extra)
    return header, rows


def _t_grid(sc: Scenario) -> list[float]:
    g = sc.params.get("t_grid")
    if g is None:
        raise DomainError("task needs params.t_grid")
    if isinstance(g, Mapping):
        return list(np.round(np.arange(float(g["start"]), float(g["stop"]) + 1e-12, float(g["step"])), 12))
    return [float(t) for t in g]


def _task_hamiltonian(sc: Scenario, threads: int) -> Outcome:
    _need(sc, "field", "functional")
    scan = ctl.hamiltonian_scan(sc.functional, sc.field, sc.family, _t_grid(sc), threads=threads)
    tol = sc.params.get("constancy_tol")
    ok = tol is None or scan.constancy_deviation <= float(tol)
    report = {
        "family": scan.family, "bound": "family-relative lower bound for m(t)",
        "constancy_deviation": scan.constancy_deviation, "constancy_tol": tol,
    }
    return Outcome(ok, report, {"scan": _scan_rows(scan, sc.dimension)})


def _task_pontryagin(sc: Scenario, threads: int) -> Outcome:
    _need(sc, "field", "functional")
    rep = ctl.pontryagin_check(
        sc.functional, sc.field, sc.family, _t_grid(sc), slack=float(sc.params.get("slack", 1e-3)), threads=threads
    )
    header, rows = _scan_rows(rep.scan, sc.dimension)
    rows = [r + [v] for r, v in zip(rows, rep.violations)]
    report = {
        "family": rep.scan.family, "slack": rep.slack, "worst_violation": rep.worst_violation,
        "worst_t": rep.worst_t, "worst_maximizer": rep.worst_maximizer,
    }
    return Outcome(rep.passed, report, {"scan": (header + ["violation"], rows)})


def _task_pommerenke(sc: Scenario, threads: int) -> Outcome:
    _need(sc, "field", "functional")
    p = sc.params
    rep = ctl.pommerenke_check(
        sc.functional, sc.field, sc.family,
        t_limit=float(p.get("t_limit", 20.0)), tol=float(p.get("tol", 1e-4)),
        certified=bool(p.get("certified", False)), initial_tol=float(p.get("initial_tol", 1e-3)),
    )
    report = {k: getattr(rep, k) for k in (
        "m_initial", "m_limit", "t_limit", "minus_re_LF", "limit_gap", "initial_gap", "tol", "initial_tol",
        "certified", "limit_ok", "initial_ok")}
    return Outcome(rep.passed, report)


def _task_screen(sc: Scenario, threads: int) -> Outcome:
    _need(sc, "field")
    p = sc.params
    res = ctl.support_screen(
        sc.field, float(p.get("T", 0.0)), margin=float(p.get("margin", ctl.SCREEN_MARGIN)),
        radii=tuple(p.get("radii", hm.BOUNDARY_RADII)),
    )
    report = {"T": res.T, "sup_value": res.sup_value, "fires": res.fires, "verdict": res.verdict,
              "witness": res.witness, "margin": res.margin}
    # the screen is a one-sided test: not firing is "no conclusion", not a failure
    return Outcome(True, report)


def _task_membership(sc: Scenario, threads: int) -> Outcome:
    p = sc.params
    if "maps" in p:
        maps = [hm.descriptor_from_dict(m) for m in p["maps"]]
    else:
        _need(sc, "field")
        maps = list(sc.field.pieces)
    radii = tuple(p.get("radii", hm.DEFAULT_RADII))
    rows, ok, entries = [], True, []
    for i, m in enumerate(maps):
        rep = hm.check_class_membership(m, radii=radii)
        ok = ok and rep.passed
        entries.append({"index": i, "passed": rep.passed, "worst_margin": rep.worst_margin,
                        "worst_point": rep.worst_point, "normalization_ok": rep.normalization_ok})
        rows.append([i, int(rep.passed), rep.worst_margin])
    tables = {"margins": (["index", "passed", "worst_margin"], rows)}
    report = {"maps": entries}
    # perturbations P (no linear term): largest delta with -z + eps P admissible for eps <= delta
    perts = [hm.jet_from_dict(q) for q in p.get("perturbations", [])]
    if perts:
        deltas = [hm.membership_radius(P) for P in perts]
        report["membership_radius"] = deltas
        tables["radius"] = (["index", "delta"], [[i, float(d)] for i, d in enumerate(deltas)])
    return Outcome(ok, report, tables)


HANDLERS: dict[str, Callable[[Scenario, int], Outcome]] = {
    "flow": _task_flow,
    "map": _task_map,
    "vary": _task_vary,
    "hamiltonian": _task_hamiltonian,
    "pontryagin": _task_pontryagin,
    "pommerenke": _task_pommerenke,
    "screen": _task_screen,
    "membership": _task_membership,
}


def run_scenario(path, task: str, out: Optional[Path] = None, threads: int = 1,
                 atol: Optional[float] = None, rtol: Optional[float] = None) -> int:
    path = Path(path)
    try:
        sc = load_scenario(path, task)
        if atol is not None:
            sc.atol = atol
        if rtol is not None:
            sc.rtol = rtol
    except (OSError, yaml.YAMLError, DomainError, KeyError, TypeError, ValueError) as exc:
        log.error("invalid scenario %s: %s", path, exc)
        return EXIT_INPUT
    try:
        outcome = HANDLERS[task](sc, threads)
    except DomainError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT
    except (KeyError, TypeError) as exc:
        log.error("scenario %s lacks a required parameter: %s", path, exc)
        return EXIT_INPUT
    except LoewnerError as exc:
        log.error("numerical failure: %s", exc)
        outcome = Outcome(False, {"error": f"{type(exc).__name__}: {exc}"})
    for p in write_outputs(sc, out or path.parent, outcome):
        log.info("wrote %s", p)
    log.info("%s/%s: %s", sc.name, task, "passed" if outcome.passed else "FAILED")
    return EXIT_OK if outcome.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loewner-control", description=__doc__.splitlines()[0])
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--scenario", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=None, help="output directory (default: next to the scenario)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--atol", type=float, default=None)
    ap.add_argument("--rtol", type=float, default=None)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get(LOG_ENV, "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads < 1 or (args.atol is not None and args.atol <= 0) or (args.rtol is not None and args.rtol <= 0):
        log.error("threads must be >= 1 and tolerances > 0")
        return EXIT_INPUT
    return run_scenario(args.scenario, args.task, args.out, args.threads, args.atol, args.rtol)


if __name__ == "__main__":
    sys.exit(main())
