"""Command-line front end.

Usage::

    anisotv run CONFIG.ini [--output DIR]
    anisotv run --preset disc [--output DIR]
    anisotv selftest
    anisotv presets

Exit status: 0 success, 1 usage or configuration error, 2 a check failed,
3 the solver diverged.
"""

import argparse
import csv
import json
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import disc_datum, rof_disc_plateau, rof_stripe_levels, stripe_datum
from .anisotropy import AnisotropyModel, preset
from .config import RunConfig, preset_names
from .counterexample import (CounterexampleConfig, lebesgue_failure_report, rasterize)
from .diagnostics import boundary_diagnostics, midrange_level
from .exceptions import AnisoTVError, ConfigError, SolverDivergedError
from .geometry import coarea_check, perimeter, upper_level_set
from .grid import GridSpec, ScalarField
from .io import save_field, write_pbm, write_pgm
from .pairing import blowup
from .solver import ProblemSpec, solve, subgradient_slack, verify_subgradient

SCHEMA_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_DIVERGED = 0, 1, 2, 3


def _check(value, bound, passed):
    return {"value": _jsonable(value), "bound": _jsonable(bound), "passed": bool(passed)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


# -- building problems from a configuration ----------------------------------------

def build_model(cfg):
    m, dim = cfg["model"], cfg["problem"]["dim"]
    if not m["kind"]:
        return preset(m["preset"], dim)
    if m["kind"] == "euclidean":
        return AnisotropyModel.euclidean(dim)
    if m["kind"] == "weighted":
        return AnisotropyModel.weighted(m["weight"], dim=dim)
    if len(m["matrix"]) != dim * dim:
        raise ConfigError(f"model matrix needs {dim * dim} entries")
    return AnisotropyModel.riemannian(np.array(m["matrix"]).reshape(dim, dim))


def build_problem(cfg):
    p = cfg["problem"]
    grid = GridSpec.regular(p["cells"], p["dim"], p["length"])
    if p["datum"] == "disc":
        datum = disc_datum(grid, p["radius"], height=p["height"])
    elif p["datum"] == "stripe":
        datum = stripe_datum(grid, p["level"], p["axis"], p["height"])
    else:
        datum = ScalarField(grid, np.full(grid.shape, p["height"]))
    model = build_model(cfg)
    if p["mode"] == "rof":
        return ProblemSpec.rof(datum, p["lam"], model)
    boundary = ScalarField(grid, np.full(grid.shape, p["boundary_value"]))
    return ProblemSpec.prescribed(datum, boundary, model)


def _solve(cfg, spec):
    s = cfg["solver"]
    return solve(spec, max_iters=s["max_iters"], gap_tol=s["gap_tol"],
                 step_ratio=s["step_ratio"] or None, check_every=s["check_every"])


def _tolerances(cfg):
    d = cfg["diagnostics"]
    return {k: d[k] for k in ("gamma", "plateau_tol", "pairing_tol", "zeqnu_tol",
                              "trace_tol", "coarea_tol", "slack_tol")} | {"gap_tol": cfg["solver"]["gap_tol"]}


def _diag_kwargs(cfg):
    d = cfg["diagnostics"]
    return dict(n_points=d["n_points"], radii_cells=tuple(d["radii_cells"]),
                normal_radius_cells=d["normal_radius_cells"], trace_rho_cells=d["trace_rho_cells"],
                trace_r_cells=d["trace_r_cells"], density_rho_cells=d["density_rho_cells"])


# -- commands -------------------------------------------------------------------------

class Run:
    """One command execution: collects the report, checks and artefacts."""

    def __init__(self, cfg, outdir):
        self.cfg = cfg
        self.out = Path(outdir)
        self.formats = set(cfg["output"]["formats"])
        self.report = {}
        self.checks = {}
        self.artefacts = []

    def write(self, name, writer, *args):
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        writer(path, *args)
        self.artefacts.append(name)

    def dump_fields(self, res):
        if "bin" in self.formats:
            self.write("u.bin", save_field, res.u)
            self.write("z.bin", save_field, res.z)
            self.write("g.bin", save_field, res.g)
        if "pgm" in self.formats and res.u.grid.dim == 2:
            self.write("u.pgm", write_pgm, res.u)

    def solve_section(self):
        spec = build_problem(self.cfg)
        res = _solve(self.cfg, spec)
        self.report["problem"] = spec.describe()
        self.report["solve"] = res.summary()
        self.checks["converged"] = _check(res.relative_gap, self.cfg["solver"]["gap_tol"], res.converged)
        self.dump_fields(res)
        return spec, res

    # each command fills self.report / self.checks

    def cmd_solve(self):
        self.solve_section()

    def cmd_verify(self):
        spec, res = self.solve_section()
        tol = _tolerances(self.cfg)
        d = self.cfg["diagnostics"]
        cal = verify_subgradient(res, spec.model)
        self.report["calibration"] = cal.to_dict()
        self.checks["feasible"] = _check(cal.feasibility_excess, 1e-9, cal.feasibility_excess <= 1e-9)
        if spec.mode == "rof" and cal.total_variation > 0:
            self.checks["pairing_residual"] = _check(
                cal.pairing_residual_relative, tol["pairing_tol"],
                cal.pairing_residual_relative <= tol["pairing_tol"])
        if d["perturbations"]:
            slack = subgradient_slack(res, spec.model, d["perturbations"])
            self.report["subgradient_slack_min"] = float(slack.min())
            self.checks["subgradient_inequality"] = _check(
                float(slack.min()), -tol["slack_tol"], slack.min() >= -tol["slack_tol"])
        self._analytic_checks(spec, res, tol)
        if float(np.ptp(res.u.values[res.u.grid.mask])) > 1e-6:
            diag = boundary_diagnostics(res.u, res.z, spec.model, **_diag_kwargs(self.cfg))
            summ = diag.summary()
            self.report["boundary"] = summ
            self.checks["zeqnu_median"] = _check(summ["zeqnu_median"], tol["zeqnu_tol"],
                                                 summ["zeqnu_median"] <= tol["zeqnu_tol"])
            self.checks["trace_upper"] = _check(summ["trace_excess_max"], tol["trace_tol"],
                                                summ["trace_excess_max"] <= tol["trace_tol"])
            g = tol["gamma"]
            self.checks["density"] = _check([summ["density_min"], summ["density_max"]], [g, 1 - g],
                                            summ["density_min"] >= g and summ["density_max"] <= 1 - g)
            self._csv_boundary(diag)

    def _analytic_checks(self, spec, res, tol):
        p = self.cfg["problem"]
        if spec.mode != "rof" or not spec.model.kind == "euclidean":
            return
        grid = spec.grid
        if p["datum"] == "disc":
            # the plateau drops by d / (lam R) whatever the height
            expected = p["height"] - (1.0 - rof_disc_plateau(p["lam"], p["radius"], p["dim"]))
            centre = np.full(p["dim"], 0.5 * p["length"])
            r2 = np.sum((grid.points - centre) ** 2, axis=-1)
            plateau = float(res.u.values[r2 < (0.5 * p["radius"]) ** 2].mean())
            err = abs(plateau - expected) / abs(expected)
            self.report["plateau"] = {"measured": plateau, "expected": expected}
            self.checks["plateau"] = _check(err, tol["plateau_tol"], err <= tol["plateau_tol"])
        elif p["datum"] == "stripe":
            lo, hi = rof_stripe_levels(p["lam"], p["level"], p["length"])
            x = grid.points[..., p["axis"]]
            low = float(res.u.values[x < p["level"] - 0.1 * p["length"]].mean())
            high = float(res.u.values[x > p["level"] + 0.1 * p["length"]].mean())
            exp_lo, exp_hi = p["height"] * lo, p["height"] * hi
            err = max(abs(low - exp_lo), abs(high - exp_hi)) / p["height"]
            self.report["stripe_levels"] = {"measured": [low, high], "expected": [exp_lo, exp_hi]}
            self.checks["stripe_levels"] = _check(err, tol["plateau_tol"], err <= tol["plateau_tol"])

    def _csv_boundary(self, diag):
        if "csv" not in self.formats:
            return
        radii = self.cfg["diagnostics"]["radii_cells"]

        def writer(path):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["point", *[f"x_{k}" for k in range(diag.points.shape[1])],
                            "zeqnu_residual", "trace", "density",
                            *[f"osc_{r}h" for r in radii]])
                for i, x in enumerate(diag.points):
                    w.writerow([i, *map(repr, map(float, x)), repr(float(diag.zeqnu_residuals[i])),
                                repr(float(diag.traces[i])), repr(float(diag.densities[i])),
                                *map(repr, map(float, diag.oscillations[i]))])

        self.write("boundary.csv", writer)

    def cmd_levelset(self):
        spec, res = self.solve_section()
        tol = _tolerances(self.cfg)
        d = self.cfg["diagnostics"]
        u = res.u
        level = midrange_level(u)
        E = upper_level_set(u, level)
        self.report["levelset"] = {
            "level": level,
            "volume": E.volume(),
            "perimeter": perimeter(E, spec.model, d["perimeter_method"]),
            "perimeter_faces": perimeter(E, spec.model, "faces"),
            "boundary_cells": int(len(E.boundary_cells)),
        }
        err = coarea_check(u, spec.model, d["thresholds"], d["perimeter_method"])
        self.report["levelset"]["coarea_error"] = err
        self.checks["coarea"] = _check(err, tol["coarea_tol"], err <= tol["coarea_tol"])
        if float(np.ptp(u.values[u.grid.mask])) > 1e-6:
            diag = boundary_diagnostics(u, res.z, spec.model, **_diag_kwargs(self.cfg))
            g = tol["gamma"]
            lo, hi = float(diag.densities.min()), float(diag.densities.max())
            self.checks["density"] = _check([lo, hi], [g, 1 - g], lo >= g and hi <= 1 - g)
        if "pbm" in self.formats and u.grid.dim == 2:
            self.write("levelset.pbm", write_pbm, E.mask)

    def cmd_blowup(self):
        spec, res = self.solve_section()
        tol = _tolerances(self.cfg)
        diag = boundary_diagnostics(res.u, res.z, spec.model, **_diag_kwargs(self.cfg))
        summ = diag.summary()
        self.report["boundary"] = summ
        self.checks["zeqnu_median"] = _check(summ["zeqnu_median"], tol["zeqnu_tol"],
                                             summ["zeqnu_median"] <= tol["zeqnu_tol"])
        self.checks["oscillation_monotone"] = _check(summ["mean_oscillation_by_radius"], "decreasing",
                                                     summ["oscillation_monotone"])
        self._csv_boundary(diag)

    def cmd_counterexample(self):
        c = self.cfg["counterexample"]
        delta = c["delta"] or None
        cx = CounterexampleConfig.default(c["dim"], delta, c["epsilon"], c["first"], c["last"])
        try:
            rep = lebesgue_failure_report(cx, c["quadrature"])
        except AnisoTVError as exc:
            self.report["counterexample_error"] = str(exc)
            self.checks["counterexample"] = _check(None, None, False)
            return
        self.report["counterexample"] = rep
        for key in ("large_ok", "small_ok", "gap_ok", "lp_ok", "balls_disjoint"):
            self.checks[f"counterexample_{key}"] = _check(rep.get(key), True, rep[key])
        if "csv" in self.formats:
            def writer(path):
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["n", "radius", "large_ball_average", "small_ball_average"])
                    small = rep["small_ball_averages"] + [None]
                    for n, r, a, b in zip(rep["indices"], cx.radii, rep["large_ball_averages"], small):
                        w.writerow([n, repr(r), repr(a), "" if b is None else repr(b)])
            self.write("counterexample.csv", writer)
        if c["blowup"]:
            self._counterexample_blowup(cx, c)

    def _counterexample_blowup(self, cx, c):
        h, half = c["blowup_spacing"], c["blowup_half_width"]
        n = int(round(2 * half / h))
        grid = GridSpec((n,) * cx.dim, h, (-half,) * cx.dim)
        z = rasterize(cx, grid)
        tagged = [(rr, big) for r in cx.radii for rr, big in ((3 * r, True), (r, False))
                  if 2 * h <= rr <= half]
        radii = [rr for rr, _ in tagged]
        series = blowup(z, np.zeros(cx.dim), radii)
        e = np.zeros(cx.dim)
        e[-1] = 1.0
        series.reference = e
        self.report["counterexample_blowup"] = series.to_dict() | {"spacing": h}
        large = series.residuals()[[big for _, big in tagged]]
        bound = 6.0 ** -cx.dim - cx.delta - 2e-3
        self.checks["counterexample_blowup_residual"] = _check(float(large.min()), bound,
                                                              large.min() >= bound)
        self.checks["counterexample_not_lebesgue"] = _check(series.lebesgue_like, False,
                                                           not series.lebesgue_like)
        if "csv" in self.formats:
            self.write("counterexample_blowup.csv", series.to_csv)

    def cmd_selftest(self):
        from .selftest import run_selftest
        results = run_selftest()
        self.report["selftest"] = {k: v["value"] for k, v in results.items()}
        self.checks.update(results)


def execute(cfg, outdir):
    """Run ``cfg`` and write ``report.json``; returns ``(exit_code, report)``."""
    run = Run(cfg, outdir)
    start = time.perf_counter()
    getattr(run, f"cmd_{cfg.command}")()
    elapsed = time.perf_counter() - start
    passed = all(c["passed"] for c in run.checks.values())
    report = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": cfg.command,
        "config": {"source": cfg.source, "text": cfg.text, "parsed": cfg.as_dict()},
        "tolerances": _tolerances(cfg),
        "results": run.report,
        "checks": run.checks,
        "passed": passed,
        "artefacts": sorted(run.artefacts),
        "metadata": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "runtime_seconds": elapsed,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "platform": platform.platform(),
        },
    }
    report = _jsonable(report)
    run.out.mkdir(parents=True, exist_ok=True)
    (run.out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return (EXIT_OK if passed else EXIT_CHECK), report


def _parser():
    ap = argparse.ArgumentParser(prog="anisotv", description="Anisotropic TV calibration toolkit")
    ap.add_argument("--version", action="version", version=f"anisotv {__version__}")
    sub = ap.add_subparsers(dest="action", required=True)
    run = sub.add_parser("run", help="execute a run configuration")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="path to an INI configuration")
    src.add_argument("--preset", help="name of a bundled configuration")
    run.add_argument("--output", help="output directory (overrides [output] directory)")
    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.add_argument("--output", default=None)
    sub.add_parser("presets", help="list bundled configurations")
    return ap


def main(argv=None):
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.action == "presets":
            print("\n".join(preset_names()))
            return EXIT_OK
        if args.action == "selftest":
            cfg = RunConfig("[run]\ncommand = selftest\n", "selftest")
        elif args.preset:
            cfg = RunConfig.from_preset(args.preset)
        else:
            cfg = RunConfig.from_path(args.config)
        outdir = args.output or cfg["output"]["directory"]
        code, report = execute(cfg, outdir)
    except (FileNotFoundError, ConfigError) as exc:
        print(f"anisotv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDivergedError as exc:
        print(f"anisotv: solver diverged: {exc}", file=sys.stderr)
        print(json.dumps(_jsonable(exc.diagnostics), indent=2, default=str), file=sys.stderr)
        return EXIT_DIVERGED
    except AnisoTVError as exc:
        print(f"anisotv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    failed = [k for k, c in report["checks"].items() if not c["passed"]]
    status = "passed" if not failed else "FAILED: " + ", ".join(failed)
    print(f"{cfg.command}: {status} ({Path(outdir) / 'report.json'})")
    return code


if __name__ == "__main__":
    sys.exit(main())
