"""Scenario-driven batch front end.

One JSON scenario declares a form, one or more maps, optional metrics, a
grid, and a task list; `qrcurves run scenario.json` executes the tasks in
order and writes a single structured report (stable key order, no
timestamps, so identical scenario + seed gives byte-identical output)
plus optional CSV dumps.

Exit codes: 0 all verifications passed, 2 at least one verification
failed (the report says which), 1 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, distortion, forms, functionals, limits, maps
from .decomposition import graph_decompose, jacobian_positivity
from .errors import ValidationError
from .grids import AnnulusMask, BallMask, GridDomain

SCHEMA_VERSION = 1

TASK_NAMES = ("verify_qrc", "decompose", "caccioppoli", "liouville",
              "quasiminimality", "limit", "positivity", "bounded_ratio")


# ---------------------------------------------------------------------------
# scenario loading and validation


def _expect(cond, errors, path, message):
    if not cond:
        errors.append(f"{path}: {message}")
    return cond


def _build_form(decl: dict, errors, path="form"):
    if not isinstance(decl, dict):
        errors.append(f"{path}: must be an object")
        return None
    try:
        if "builtin" in decl:
            name = decl["builtin"]
            if name == "volume":
                return forms.euclidean_volume(int(decl["n"]))
            if name == "symplectic":
                return forms.symplectic(int(decl["ambient_dim"]))
            if name == "heisenberg_star":
                return forms.heisenberg_star()
            if name == "hyperbolic_volume":
                return forms.hyperbolic_volume(int(decl["n"]),
                                               int(decl["m"]))
            if name == "simple_constant":
                return forms.simple_constant(int(decl["ambient_dim"]),
                                             tuple(decl["index"]),
                                             float(decl.get("scale", 1.0)))
            errors.append(f"{path}.builtin: unknown built-in form {name!r}")
            return None
        if "coefficients" in decl:
            return forms.expression_form(
                int(decl["degree"]), int(decl["ambient_dim"]),
                decl["coefficients"], decl.get("name", "user_form"),
                closed=bool(decl.get("closed", False)))
        errors.append(f"{path}: needs 'builtin' or 'coefficients'")
    except (KeyError, TypeError, ValueError) as err:
        errors.append(f"{path}: {err}")
    return None


def _build_map(decl: dict, errors, path="map"):
    if not isinstance(decl, dict):
        errors.append(f"{path}: must be an object")
        return None
    try:
        if "builtin" in decl:
            name = decl["builtin"]
            params = decl.get("parameters", {})
            if name not in maps.BUILTIN_MAPS:
                errors.append(f"{path}.builtin: unknown built-in map {name!r}")
                return None
            factory = maps.BUILTIN_MAPS[name][0]
            return factory(**params)
        if "expressions" in decl:
            return maps.expression_map(int(decl["source_dim"]),
                                       list(decl["expressions"]),
                                       decl.get("name", "expression"))
        if "matrix" in decl:
            return maps.affine(decl["matrix"], decl.get("offset"))
        if "product" in decl:
            f1 = _build_map(decl["product"][0], errors, path + ".product[0]")
            f2 = _build_map(decl["product"][1], errors, path + ".product[1]")
            if f1 is None or f2 is None:
                return None
            return maps.product(f1, f2)
        errors.append(f"{path}: needs 'builtin', 'expressions', 'matrix', "
                      "or 'product'")
    except (KeyError, TypeError, ValueError) as err:
        errors.append(f"{path}: {err}")
    return None


def _build_metric(decl, errors, path):
    if decl is None:
        return None
    try:
        kind = decl["builtin"]
        if kind == "euclidean":
            return forms.euclidean_metric(int(decl["dim"]))
        if kind == "hyperbolic":
            return forms.hyperbolic_metric(int(decl["dim"]))
        if kind == "expression":
            return forms.expression_metric(int(decl["dim"]),
                                           decl["source"],
                                           decl.get("name", "expr"))
        errors.append(f"{path}.builtin: unknown metric {kind!r}")
    except (KeyError, TypeError, ValueError) as err:
        errors.append(f"{path}: {err}")
    return None


def _build_grid(decl: dict, errors, path="grid"):
    if not isinstance(decl, dict):
        errors.append(f"{path}: must be an object")
        return None
    try:
        mask = None
        mdecl = decl.get("mask")
        if mdecl is not None:
            kind = mdecl.get("kind")
            if kind == "ball":
                mask = BallMask(tuple(mdecl["center"]),
                                float(mdecl["radius"]))
            elif kind == "annulus":
                mask = AnnulusMask(tuple(mdecl["center"]),
                                   float(mdecl["inner"]),
                                   float(mdecl["outer"]))
            else:
                errors.append(f"{path}.mask.kind: unknown mask {kind!r}")
        res = decl["resolution"]
        if isinstance(res, int):
            res = [res] * len(decl["box"])
        return GridDomain(tuple(tuple(b) for b in decl["box"]),
                          tuple(res), mask)
    except (KeyError, TypeError, ValueError) as err:
        errors.append(f"{path}: {err}")
    return None


def _build_cutoff(decl: dict, errors, path):
    try:
        kind = decl["kind"]
        if kind == "smooth_bump":
            return functionals.smooth_bump(tuple(decl["center"]),
                                           float(decl["inner"]),
                                           float(decl["outer"]))
        if kind == "log_capacity":
            return functionals.capacity_cutoff(float(decl["inner"]),
                                               float(decl["outer"]),
                                               int(decl["dim"]),
                                               float(decl.get("mollify", 0.0)))
        errors.append(f"{path}.kind: unknown cutoff {kind!r}")
    except (KeyError, TypeError, ValueError) as err:
        errors.append(f"{path}: {err}")
    return None


def load_scenario(payload: dict):
    """Validate and build every ingredient; all defects reported together."""
    errors: list[str] = []
    _expect(payload.get("schema_version") == SCHEMA_VERSION, errors,
            "schema_version", f"must be {SCHEMA_VERSION}")
    seed = payload.get("seed", 0)
    _expect(isinstance(seed, int), errors, "seed", "must be an integer")

    form = _build_form(payload.get("form"), errors) \
        if "form" in payload else None
    grid = _build_grid(payload.get("grid"), errors) \
        if "grid" in payload else None

    built_maps = {}
    if "map" in payload:
        built_maps["map"] = _build_map(payload["map"], errors, "map")
    for mname, mdecl in payload.get("maps", {}).items():
        built_maps[mname] = _build_map(mdecl, errors, f"maps.{mname}")

    metrics = {key: _build_metric(payload.get("metrics", {}).get(key),
                                  errors, f"metrics.{key}")
               for key in ("domain", "target")}

    tasks = payload.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        errors.append("tasks: must be a non-empty list")
        tasks = []
    for t, task in enumerate(tasks):
        p = f"tasks[{t}]"
        if not isinstance(task, dict) or "task" not in task:
            errors.append(f"{p}: needs a 'task' name")
            continue
        name = task["task"]
        if name not in TASK_NAMES:
            errors.append(f"{p}.task: unknown task {name!r}; "
                          f"choose from {', '.join(TASK_NAMES)}")
            continue
        if name in ("verify_qrc", "limit") and "K" in task:
            _expect(float(task["K"]) >= 1.0, errors, f"{p}.K",
                    "K must be >= 1")
        if name == "verify_qrc":
            _expect("K" in task, errors, p, "verify_qrc needs K")
        if name == "decompose":
            for key in ("x", "K", "K_prime", "epsilon"):
                _expect(key in task, errors, p, f"decompose needs {key}")
            if "K" in task and "K_prime" in task:
                _expect(float(task["K_prime"]) > float(task["K"]) >= 1.0,
                        errors, p, "needs K' > K >= 1")
            if "epsilon" in task:
                _expect(float(task["epsilon"]) > 0.0, errors,
                        f"{p}.epsilon", "must be positive")
        if name == "caccioppoli":
            _expect("cutoff" in task, errors, p, "caccioppoli needs a cutoff")
            if "cutoff" in task:
                task["_cutoff"] = _build_cutoff(task["cutoff"], errors,
                                                f"{p}.cutoff")
        if name == "liouville":
            for key in ("inner", "outers"):
                _expect(key in task, errors, p, f"liouville needs {key}")
        if name == "quasiminimality":
            _expect("competitor" in task, errors, p,
                    "quasiminimality needs a competitor map name")
            comp = task.get("competitor")
            if comp is not None and comp not in built_maps:
                errors.append(f"{p}.competitor: no map named {comp!r} in "
                              "'maps'")
        if name == "limit":
            _expect("family" in task, errors, p, "limit needs a family")
            fam = task.get("family", {})
            if fam.get("builtin") not in limits.BUILTIN_FAMILIES:
                errors.append(f"{p}.family.builtin: unknown family "
                              f"{fam.get('builtin')!r}")
            _expect(bool(fam.get("indices")), errors, f"{p}.family.indices",
                    "must be a non-empty index list")
            if "cutoff" in task:
                task["_cutoff"] = _build_cutoff(task["cutoff"], errors,
                                                f"{p}.cutoff")

    # dimension consistency
    main = built_maps.get("map")
    if main is not None and form is not None:
        _expect(form.ambient_dim == main.target_dim, errors, "form",
                f"form lives on R^{form.ambient_dim} but the map targets "
                f"R^{main.target_dim}")
        _expect(form.degree == main.source_dim, errors, "form",
                f"form degree {form.degree} != map source dimension "
                f"{main.source_dim}")
    if main is not None and grid is not None:
        _expect(grid.dim == main.source_dim, errors, "grid",
                f"grid dimension {grid.dim} != map source dimension "
                f"{main.source_dim}")

    if errors:
        raise ValidationError("scenario invalid:\n  " + "\n  ".join(errors))
    return {"form": form, "maps": built_maps, "grid": grid,
            "metrics": metrics, "tasks": tasks, "seed": seed}


def scenario_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# task execution


def _metrics_pair(ctx):
    dom, tgt = ctx["metrics"]["domain"], ctx["metrics"]["target"]
    return (dom, tgt) if (dom is not None or tgt is not None) else None


def _run_task(task: dict, ctx: dict, out_dir: Path, csv_dumps: bool):
    name = task["task"]
    form, grid = ctx["form"], ctx["grid"]
    main = ctx["maps"].get("map")
    seed = ctx["seed"]

    if name == "verify_qrc":
        rep = distortion.verify_qrc(main, form, grid, float(task["K"]),
                                    float(task.get("tol", 1e-6)),
                                    metrics=_metrics_pair(ctx))
        if csv_dumps:
            distortion.write_distortion_csv(
                main, form, grid, out_dir / "distortion.csv",
                metrics=_metrics_pair(ctx))
        return rep.verified, rep.to_dict()

    if name == "decompose":
        res = graph_decompose(main, form, np.asarray(task["x"], dtype=float),
                              float(task["K"]), float(task["K_prime"]),
                              float(task["epsilon"]), grid, seed=seed)
        lo, hi = res.sandwich_bounds
        tol = float(task.get("tol", 1e-6))
        ok = (not res.inconclusive and res.sandwich_violations == 0
              and res.fhat_report.verified
              and res.margin_min >= lo - tol and res.margin_max <= hi + tol)
        return ok, res.to_dict()

    if name == "caccioppoli":
        tau = forms.potential_field(form)
        rep = functionals.caccioppoli_check(
            main, form, tau, task["_cutoff"], grid,
            K=float(task.get("K", 1.0)))
        ok = (rep.parts_residual <= float(task.get("residual_tol", 1e-3))
              and rep.inequality_ok)
        return ok, rep.to_dict()

    if name == "liouville":
        tau = forms.potential_field(form)
        rows = functionals.liouville_decay_curve(
            main, form, tau, float(task["inner"]),
            [float(r) for r in task["outers"]],
            K=float(task.get("K", 1.0)),
            resolution=int(task.get("resolution", 96)),
            outer_resolution=int(task.get("outer_resolution", 64)))
        if csv_dumps:
            functionals.write_decay_csv(rows, out_dir / "liouville_decay.csv")
        bounds = [r.bound for r in rows]
        ok = all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))
        return ok, {"rows": [r.to_dict() for r in rows],
                    "monotone_decay": ok}

    if name == "quasiminimality":
        comp = ctx["maps"][task["competitor"]]
        rep = functionals.quasiminimality_compare(
            main, comp, grid, form, float(task.get("K", 1.0)),
            tol=float(task.get("tol", 0.02)))
        return rep.verified, rep.to_dict()

    if name == "limit":
        fam_decl = task["family"]
        factory = limits.BUILTIN_FAMILIES[fam_decl["builtin"]][0]
        args = dict(fam_decl.get("parameters", {}))
        fam = factory(indices=list(fam_decl["indices"]), **args)
        zeta = task.get("_cutoff") or functionals.smooth_bump(
            tuple(np.mean(grid.box, axis=1)),
            0.25 * min(hi - lo for lo, hi in grid.box),
            0.45 * min(hi - lo for lo, hi in grid.box))
        rep = limits.convergence_report(fam, form, zeta, grid,
                                        K=float(task["K"]) if "K" in task
                                        else None,
                                        tol=float(task.get("tol", 1e-6)))
        if csv_dumps:
            limits.write_convergence_csv(rep, out_dir / "convergence.csv")
        ok = (rep.limit_report.verified if rep.limit_report is not None
              else rep.lsc.ok)
        return ok, rep.to_dict()

    if name == "positivity":
        rep = jacobian_positivity(main, form, grid)
        expect = task.get("expect_fraction")
        ok = (rep.fraction >= float(expect) if expect is not None
              else rep.violations.shape[0] == 0)
        return ok, rep.to_dict()

    if name == "bounded_ratio":
        res = forms.bounded_ratio(form, grid if form.ambient_dim == grid.dim
                                  else _target_region(task, form))
        return True, {"sup": res.sup, "inf": res.inf, "ratio": res.ratio,
                      "n_samples": res.n_samples,
                      "heuristic": res.heuristic}

    raise ValidationError(f"unknown task {name!r}")


def _target_region(task, form):
    box = task.get("region_box")
    if box is None:
        raise ValidationError("bounded_ratio on a target form needs "
                              "'region_box' when the grid lives on the "
                              "source")
    res = task.get("region_resolution", 16)
    return GridDomain(tuple(tuple(b) for b in box),
                      (int(res),) * len(box))


def _sanitize(obj):
    """Strict-JSON form: non-finite floats become strings, arrays lists."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def run_scenario(path, out_dir=None, seed=None, threads=None,
                 csv_dumps=False) -> int:
    """Execute a scenario file; returns the process exit code."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: cannot read scenario: {err}", file=sys.stderr)
        return 1

    if seed is not None:
        payload["seed"] = seed
    try:
        ctx = load_scenario(payload)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    out = Path(out_dir) if out_dir else path.parent
    out.mkdir(parents=True, exist_ok=True)

    report = {
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "scenario_hash": scenario_hash(payload),
        "seed": ctx["seed"],
        "tasks": [],
        "all_verified": True,
    }
    code = 0
    for task in ctx["tasks"]:
        tname = task["task"]
        try:
            ok, metrics = _run_task(task, ctx, out, csv_dumps)
        except Exception as err:  # runtime error: report and bail with 1
            print(f"error: task {tname!r} failed: {err}", file=sys.stderr)
            return 1
        report["tasks"].append({"name": tname, "verified": bool(ok),
                                "metrics": metrics})
        if not ok:
            report["all_verified"] = False
            code = 2

    report_path = out / "report.json"
    report_path.write_text(json.dumps(_sanitize(report), indent=2,
                                      sort_keys=False, allow_nan=False)
                           + "\n")
    print(f"report written to {report_path}")
    for entry in report["tasks"]:
        status = "ok" if entry["verified"] else "FAILED"
        print(f"  task {entry['name']}: {status}")
    return code


# ---------------------------------------------------------------------------
# catalog


def builtin_catalog() -> dict:
    return {
        "forms": {n: sig for n, (_, sig) in sorted(forms.BUILTIN_FORMS.items())},
        "maps": {n: sig for n, (_, sig) in sorted(maps.BUILTIN_MAPS.items())},
        "metrics": {n: sig for n, (_, sig)
                    in sorted(forms.BUILTIN_METRICS.items())},
        "cutoffs": {"smooth_bump": "smooth_bump(center, inner, outer)",
                    "log_capacity":
                        "log_capacity(inner, outer, dim, mollify=0)"},
        "sequence_families": {n: sig for n, (_, sig)
                              in sorted(limits.BUILTIN_FAMILIES.items())},
    }


def list_builtins(machine: bool = False) -> str:
    catalog = builtin_catalog()
    if machine:
        return json.dumps(catalog, indent=2, sort_keys=True)
    lines = []
    for section, entries in catalog.items():
        lines.append(f"{section}:")
        for name, sig in entries.items():
            lines.append(f"  {name:24s} {sig}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qrcurves",
        description="scenario-driven analyses of quasiregular curves")
    parser.add_argument("--version", action="version",
                        version=f"qrcurves {__version__}")
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="execute a scenario file")
    run_p.add_argument("scenario")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    run_p.add_argument("--threads", type=int, default=1,
                       help="worker count (reports are identical for any "
                            "value; sweeps are vectorized)")
    run_p.add_argument("--csv", action="store_true",
                       help="also write per-task CSV dumps")

    list_p = sub.add_parser("list-builtins",
                            help="catalog of built-in forms, maps, metrics")
    list_p.add_argument("--machine", action="store_true",
                        help="machine-readable JSON")

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_scenario(args.scenario, args.out, args.seed, args.threads,
                            args.csv)
    if args.command == "list-builtins":
        print(list_builtins(args.machine))
        return 0
    parser.print_help()
    return 1


if __name__ == "__main__":
    sys.exit(main())
