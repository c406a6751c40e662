"""Fast built-in invariant checks behind ``anisotv selftest``."""

import numpy as np

from .analytic import disc_datum, rof_disc_plateau
from .anisotropy import AnisotropyModel, preset
from .counterexample import CounterexampleConfig, lebesgue_failure_report
from .grid import GridSpec, ScalarField, VectorField, divergence, gradient, inner
from .pairing import pairing_apply, pairing_density
from .solver import ProblemSpec, solve, subgradient_slack, verify_subgradient


def _entry(value, bound, passed):
    return {"value": float(value), "bound": float(bound), "passed": bool(passed)}


def _anisotropy_checks(rng, out):
    worst_euler = worst_hom = worst_inv = 0.0
    worst_cvx = np.inf
    for name in ("euclidean", "diagonal", "rotating", "bump"):
        m = preset(name, 2)
        x = rng.random((500, 2))
        p = rng.standard_normal((500, 2))
        lam = rng.uniform(0.01, 10, 500)
        loc = m.local(x)
        f = loc.value(p)
        worst_hom = max(worst_hom, np.max(np.abs(loc.value(lam[:, None] * p) - lam * f) / (lam * f)))
        worst_euler = max(worst_euler, np.max(np.abs(np.sum(p * loc.grad(p), axis=1) - f) / f))
        back = loc.polar_duality_map(loc.duality_map(p))
        worst_inv = max(worst_inv, np.max(np.linalg.norm(back - p, axis=1) / np.linalg.norm(p, axis=1)))
        y = rng.standard_normal((500, 2))
        sq = lambda v: loc.value(v) ** 2
        res = sq(y) - sq(p) - 2 * np.sum(loc.duality_map(p) * (y - p), axis=1) - m.delta**2 * np.sum((y - p) ** 2, axis=1)
        worst_cvx = min(worst_cvx, res.min())
    out["homogeneity"] = _entry(worst_hom, 1e-10, worst_hom <= 1e-10)
    out["euler_identity"] = _entry(worst_euler, 1e-10, worst_euler <= 1e-10)
    out["inverse_maps"] = _entry(worst_inv, 1e-8, worst_inv <= 1e-8)
    out["strong_convexity"] = _entry(worst_cvx, -1e-10, worst_cvx >= -1e-10)


def _grid_checks(rng, out):
    g = GridSpec.regular(64)
    u = ScalarField(g, rng.standard_normal(g.shape))
    z = VectorField(g, rng.standard_normal((2,) + g.shape))
    lhs, rhs = inner(divergence(z), u), -inner(z, gradient(u))
    rel = abs(lhs - rhs) / (u.norm() * np.sqrt(inner(z, z)))
    out["adjointness"] = _entry(rel, 1e-12, rel <= 1e-12)
    psi = np.zeros(g.shape)
    psi[8:-8, 8:-8] = rng.random((48, 48))
    psi = ScalarField(g, psi)
    a, b = pairing_apply(z, u, psi), pairing_density(z, u, psi)
    rel = abs(a - b) / max(abs(b), 1e-300)
    out["pairing_identity"] = _entry(rel, 1e-12, rel <= 1e-12)


def _solver_checks(out):
    g = GridSpec.regular(64)
    f = disc_datum(g)
    model = AnisotropyModel.euclidean(2)
    res = solve(ProblemSpec.rof(f, 32.0, model), gap_tol=1e-5)
    out["small_disc_converged"] = _entry(res.relative_gap, 1e-5, res.converged)
    plateau = float(res.u.values[30:34, 30:34].mean())
    err = abs(plateau - rof_disc_plateau(32.0, 0.25)) / 0.75
    out["small_disc_plateau"] = _entry(err, 0.05, err <= 0.05)
    rep = verify_subgradient(res, model)
    out["small_disc_pairing"] = _entry(rep.pairing_residual_relative, 0.05, rep.pairing_residual_relative <= 0.05)
    slack = subgradient_slack(res, model, 20).min()
    out["small_disc_subgradient"] = _entry(slack, -1e-8, slack >= -1e-8)


def _counterexample_checks(out):
    for dim in (2, 3):
        rep = lebesgue_failure_report(CounterexampleConfig.default(dim), quadrature=4000)
        out[f"counterexample_{dim}d_gap"] = _entry(rep["gap"], rep["gap_bound"], rep["gap_ok"])


def run_selftest(seed=0):
    """Run all checks; returns ``{name: {value, bound, passed}}``."""
    rng = np.random.default_rng(seed)
    out = {}
    _anisotropy_checks(rng, out)
    _grid_checks(rng, out)
    _solver_checks(out)
    _counterexample_checks(out)
    return out
