"""Discrete anisotropic total-variation problems and their dual certificates.

Two problem modes are supported:

``rof``
    ``min_u  J(u) + lam/2 |u - f|^2``.  At the optimum ``g = lam (f - u)``
    is a subgradient of ``J`` at ``u`` and the dual field ``z`` satisfies
    ``-div z = g`` exactly, because ``u`` is recovered from ``z`` as
    ``u = f + div z / lam``.
``prescribed``
    ``min_u  J(u) - <g, u>`` over the interior cells, with the boundary layer
    of the domain frozen at given Dirichlet values.

Both are solved with a fixed-step primal-dual (Chambolle-Pock) iteration whose
dual proximal map is the radial scaling ``z / max(1, F°(x, z))``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_positive
from .anisotropy import AnisotropyModel
from .exceptions import InvalidInputError, SolverDivergedError, UnsolvableProblemError
from .grid import (GridSpec, ScalarField, VectorField, backward_divergence,
                   check_congruent, forward_difference)

MODES = ("rof", "prescribed")

DEFAULT_STEP_RATIO = {"rof": 0.07, "prescribed": 0.1}


@dataclass(eq=False)
class ProblemSpec:
    """A discrete problem: mode, anisotropy, grid and data.

    Use :meth:`rof` or :meth:`prescribed` rather than the raw constructor.
    """

    mode: str
    model: AnisotropyModel
    grid: GridSpec
    datum: ScalarField
    lam: Optional[float] = None
    boundary: Optional[ScalarField] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.model.dim != self.grid.dim:
            raise InvalidInputError("anisotropy dimension does not match the grid")
        check_congruent(self.datum, ScalarField(self.grid, np.zeros(self.grid.shape)))
        if self.mode == "rof":
            self.lam = check_positive(self.lam, "lam")
        else:
            if self.boundary is None:
                self.boundary = ScalarField(self.grid, np.zeros(self.grid.shape))
            check_congruent(self.datum, self.boundary)
            free = self.grid.mask & ~self.grid.boundary_layer
            if not free.any():
                raise InvalidInputError("prescribed mode needs at least one interior cell")

    @classmethod
    def rof(cls, f, lam, model=None):
        model = model or AnisotropyModel.euclidean(f.grid.dim)
        return cls("rof", model, f.grid, f, lam=lam)

    @classmethod
    def prescribed(cls, g, boundary=None, model=None):
        model = model or AnisotropyModel.euclidean(g.grid.dim)
        return cls("prescribed", model, g.grid, g, boundary=boundary)

    @property
    def free_mask(self):
        """Cells whose value is optimised (all domain cells in ROF mode)."""
        if self.mode == "rof":
            return self.grid.mask
        return self.grid.mask & ~self.grid.boundary_layer

    def describe(self):
        out = {"mode": self.mode, "model": self.model.describe(), "grid": self.grid.describe()}
        if self.mode == "rof":
            out["lam"] = self.lam
        return out


@dataclass(eq=False)
class SolveResult:
    """Primal solution, dual certificate and convergence record."""

    u: ScalarField
    z: VectorField
    g: ScalarField
    primal_energy: float
    dual_energy: float
    gap: float
    relative_gap: float
    iterations: int
    converged: bool
    divergence_residual: float = 0.0
    history: list = field(default_factory=list)
    steps: dict = field(default_factory=dict)

    def summary(self):
        return {
            "primal_energy": self.primal_energy,
            "dual_energy": self.dual_energy,
            "gap": self.gap,
            "relative_gap": self.relative_gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "divergence_residual": self.divergence_residual,
            "steps": dict(self.steps),
        }


@dataclass
class CalibrationReport:
    """Outcome of :func:`verify_subgradient`; all entries are non-throwing diagnostics."""

    feasibility_excess: float
    divergence_residual: float
    divergence_residual_relative: float
    pairing_residual: float
    pairing_residual_relative: float
    min_cell_pairing: float
    total_variation: float

    def to_dict(self):
        return dict(self.__dict__)


# -- energies -------------------------------------------------------------------

def _local(model, grid):
    return model.local(grid.points if model.depends_on_x else None)


def _polar_fn(loc, grid):
    """``F°`` on component-first arrays ``(d, *shape)``, specialised per kind."""
    if loc.kind == "euclidean":
        return lambda z: np.sqrt(np.einsum("k...,k...->...", z, z))
    if loc.kind == "weighted":
        w = loc.weight
        return lambda z: np.sqrt(np.einsum("k...,k...->...", z, z)) / w
    inv = loc.inverse
    if inv.ndim == 2:
        return lambda z: np.sqrt(np.maximum(np.einsum("k...,kj,j...->...", z, inv, z), 0.0))
    inv_cf = np.moveaxis(np.moveaxis(inv, -1, 0), -1, 0)  # (d, d, *shape)
    return lambda z: np.sqrt(np.maximum(np.einsum("i...,ij...,j...->...", z, inv_cf, z), 0.0))


def _value_fn(loc, grid):
    """``F`` on component-first arrays ``(d, *shape)``."""
    if loc.kind == "euclidean":
        return lambda p: np.sqrt(np.einsum("k...,k...->...", p, p))
    if loc.kind == "weighted":
        w = loc.weight
        return lambda p: w * np.sqrt(np.einsum("k...,k...->...", p, p))
    A = loc.matrix
    if A.ndim == 2:
        return lambda p: np.sqrt(np.maximum(np.einsum("k...,kj,j...->...", p, A, p), 0.0))
    A_cf = np.moveaxis(np.moveaxis(A, -1, 0), -1, 0)
    return lambda p: np.sqrt(np.maximum(np.einsum("i...,ij...,j...->...", p, A_cf, p), 0.0))


def _metric_fn(loc):
    """Dual preconditioner ``M(x) v`` (``None`` for the identity)."""
    M = loc.dual_metric()
    if M is None:
        return None, 1.0
    if M.ndim == 2:
        return (lambda v: np.einsum("ij,j...->i...", M, v)), float(np.linalg.eigvalsh(M)[-1])
    M_cf = np.moveaxis(np.moveaxis(M, -1, 0), -1, 0)
    lmax = float(np.linalg.eigvalsh(M)[..., -1].max())
    return (lambda v: np.einsum("ij...,j...->i...", M_cf, v)), lmax


def total_variation(u, model):
    """``J(u) = sum F(x, grad u) h^d`` over the domain."""
    grid = u.grid
    grad = forward_difference(u.values, grid)
    vals = _value_fn(_local(model, grid), grid)(grad)
    return float(vals[grid.mask].sum() * grid.cell_volume)


def primal_energy(u, spec):
    """``J(u)`` plus the data term of ``spec`` (ROF: ``lam/2 |u - f|^2``; prescribed: ``-<g, u>``)."""
    check_congruent(u, spec.datum)
    tv = total_variation(u, spec.model)
    grid = spec.grid
    if spec.mode == "rof":
        diff = (u.values - spec.datum.values)[grid.mask]
        return tv + 0.5 * spec.lam * float(np.sum(diff**2)) * grid.cell_volume
    free = spec.free_mask
    return tv - float(np.sum(spec.datum.values[free] * u.values[free])) * grid.cell_volume


def _extended_boundary(spec):
    b = np.zeros(spec.grid.shape)
    layer = spec.grid.boundary_layer
    b[layer] = spec.boundary.values[layer]
    return b


def dual_energy(z, spec):
    """Dual objective of ``spec`` at the field ``z`` (assumed feasible).

    ROF: ``-<f, div z> - |div z|^2 / (2 lam)``. Prescribed: ``<z, grad b>``
    where ``b`` is the Dirichlet data extended by zero; this equals the dual
    value only when ``-div z = g`` on the interior cells.
    """
    grid = spec.grid
    if spec.mode == "rof":
        dz = backward_divergence(z.values, grid)[grid.mask]
        f = spec.datum.values[grid.mask]
        return float((-np.sum(f * dz) - np.sum(dz**2) / (2 * spec.lam)) * grid.cell_volume)
    gb = forward_difference(_extended_boundary(spec), grid)
    return float(np.sum(z.values * gb) * grid.cell_volume)


# -- solvability pre-check --------------------------------------------------------------

def check_solvability(spec, iterations=3000, tol=0.02, return_field=False):
    """Look for a feasible ``z`` with ``-div z = g`` on the interior cells.

    Runs accelerated projected gradient on ``|div z + g|^2 / 2`` and returns
    the final residual relative to ``|g|`` (and the field when
    ``return_field`` is set, which the solver uses as a warm start).

    Raises
    ------
    UnsolvableProblemError
        If the relative residual stays above ``tol``; the prescribed-datum
        energy is then unbounded below.
    """
    grid = spec.grid
    zero = (0.0, np.zeros((grid.dim,) + grid.shape)) if return_field else 0.0
    if spec.mode != "prescribed":
        return zero
    free = spec.free_mask
    g = np.where(free, spec.datum.values, 0.0)
    gnorm = float(np.sqrt(np.sum(g**2)))
    if gnorm == 0:
        return zero
    loc = _local(spec.model, grid)
    polar = _polar_fn(loc, grid)
    metric, lmax = _metric_fn(loc)
    step = 0.99 * grid.spacing**2 / (4 * grid.dim * lmax)
    z = np.zeros((grid.dim,) + grid.shape)
    y = z.copy()
    t = 1.0
    dv = np.zeros(grid.shape)
    gb = np.zeros_like(z)
    rel = np.inf
    for _ in range(iterations):
        backward_divergence(y, grid, out=dv)
        r = np.where(free, dv + g, 0.0)
        forward_difference(r, grid, out=gb)
        if metric is not None:
            gb = metric(gb)
        z_new = y + step * gb
        z_new /= np.maximum(polar(z_new), 1.0)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = z_new + ((t - 1) / t_new) * (z_new - z)
        z, t = z_new, t_new
        backward_divergence(z, grid, out=dv)
        rel = float(np.sqrt(np.sum(np.where(free, dv + g, 0.0) ** 2))) / gnorm
        if rel <= 0.1 * tol:
            break
    if rel > tol:
        raise UnsolvableProblemError(
            f"no feasible field balances g (relative residual {rel:.3g} > {tol}); "
            "the energy is unbounded below")
    return (rel, z) if return_field else rel


# -- the primal-dual iteration ---------------------------------------------------------------

def solve(spec, max_iters=20000, gap_tol=1e-5, step_ratio=None, check_every=10,
          divergence_window=100, blowup_factor=10.0):
    """Minimise the energy of ``spec`` and return ``(u, z, g)`` with diagnostics.

    Parameters
    ----------
    spec : ProblemSpec
    max_iters : int
        Iteration cap; the result reports ``converged=False`` when reached.
    gap_tol : float
        Target relative duality gap ``gap / |primal energy|``. In prescribed
        mode the relative divergence residual must also fall below it.
    step_ratio : float, optional
        ``tau * |grad|``; ``sigma`` follows from ``tau sigma |grad|^2 = 0.99``.
    check_every : int
        Gap evaluation period (iterations).
    divergence_window : int
        Number of consecutive iterations of increasing merit ``|relative gap|
        + residual`` that, together with a merit above ``blowup_factor`` times
        the best seen, is reported as divergence.
    blowup_factor : float

    Raises
    ------
    SolverDivergedError
        On non-finite iterates or a sustained gap increase (see above).
    UnsolvableProblemError
        In prescribed mode, when the pre-check finds no balancing field.
    """
    gap_tol = check_positive(gap_tol, "gap_tol")
    if int(max_iters) < 1:
        raise InvalidInputError("max_iters must be >= 1")
    z0 = None
    if spec.mode == "prescribed":
        _, z0 = check_solvability(spec, return_field=True)

    grid = spec.grid
    d = grid.dim
    h_vol = grid.cell_volume
    mask = grid.mask
    free = spec.free_mask
    loc = _local(spec.model, grid)
    polar = _polar_fn(loc, grid)
    value = _value_fn(loc, grid)
    metric, lmax = _metric_fn(loc)

    op_norm = np.sqrt(4 * d) / grid.spacing
    ratio = DEFAULT_STEP_RATIO[spec.mode] if step_ratio is None else check_positive(step_ratio, "step_ratio")
    tau = ratio / op_norm
    sigma = 0.99 / (op_norm**2 * tau * lmax)

    datum = spec.datum.values
    if spec.mode == "rof":
        lam = spec.lam
        u = datum.copy()
        shrink = 1.0 / (1.0 + tau * lam)
        pull = tau * lam * datum
    else:
        lam = None
        u = np.where(free, 0.0, _extended_boundary(spec))
        g_free = np.where(free, datum, 0.0)
        g_norm = float(np.sqrt(np.sum(g_free**2) * h_vol))
        # the optimal value may be 0 (u = 0); measure the gap against |g|_1 as well
        scale = float(np.sum(np.abs(g_free)) * h_vol)
        grad_b = forward_difference(_extended_boundary(spec), grid)

    ubar = u.copy()
    z = np.zeros((d,) + grid.shape) if z0 is None else z0
    gbuf = np.zeros_like(z)
    dv = np.zeros(grid.shape)
    history = []

    def certificate():
        """(u_report, primal, dual, gap, relative_gap, divergence residual)."""
        div_z = backward_divergence(z, grid)
        if spec.mode == "rof":
            u_rep = np.where(mask, datum + div_z / lam, datum)
            grad = forward_difference(u_rep, grid)
            tv = float(value(grad)[mask].sum() * h_vol)
            fit = 0.5 * lam * float(np.sum(((u_rep - datum)[mask]) ** 2)) * h_vol
            primal = tv + fit
            dual = float((-np.sum((datum * div_z)[mask]) - np.sum(div_z[mask] ** 2) / (2 * lam)) * h_vol)
            res = 0.0
        else:
            u_rep = u.copy()
            grad = forward_difference(u_rep, grid)
            tv = float(value(grad)[mask].sum() * h_vol)
            primal = tv - float(np.sum((datum * u_rep)[free])) * h_vol
            dual = float(np.sum(z * grad_b) * h_vol)
            res_abs = float(np.sqrt(np.sum(((div_z + datum)[free]) ** 2) * h_vol))
            res = res_abs / g_norm if g_norm > 0 else res_abs
        gap = primal - dual
        rel = gap / max(abs(primal), abs(dual), 1e-300 if spec.mode == "rof" else scale, 1e-300)
        return u_rep, primal, dual, gap, rel, res

    best_merit = np.inf
    last_merit = np.inf
    rising = 0
    it = 0
    converged = False
    for it in range(1, int(max_iters) + 1):
        forward_difference(ubar, grid, out=gbuf)
        if metric is not None:
            gbuf = metric(gbuf)
        gbuf *= sigma
        z += gbuf
        z /= np.maximum(polar(z), 1.0)

        backward_divergence(z, grid, out=dv)
        ubar[...] = u
        if spec.mode == "rof":
            u += tau * dv
            u += pull
            u *= shrink
            u[~mask] = datum[~mask]
        else:
            u += tau * np.where(free, dv + datum, 0.0)
        ubar *= -1.0
        ubar += 2.0 * u

        if it % check_every == 0 or it == max_iters:
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(z))):
                raise SolverDivergedError("non-finite iterate", {"iteration": it, "history": history[-10:]})
            _, primal, dual, gap, rel, res = certificate()
            history.append((it, rel, res))
            if abs(rel) <= gap_tol and res <= gap_tol:
                converged = True
                break
            # the prescribed-mode dual value bounds the primal only once -div z = g,
            # so progress is measured by |gap| plus the divergence residual
            merit = abs(rel) + res
            if merit > last_merit * (1 + 1e-12) + 1e-15:
                rising += check_every
            else:
                rising = 0
            last_merit = merit
            best_merit = min(best_merit, merit)
            # primal-dual gaps oscillate; only a sustained rise far above the best seen counts
            if rising >= divergence_window and merit > blowup_factor * best_merit:
                raise SolverDivergedError(
                    f"duality gap increased for {rising} consecutive iterations",
                    {"iteration": it, "gap": gap, "merit": merit, "best_merit": best_merit,
                     "tau": tau, "sigma": sigma, "history": history[-12:]})

    z /= np.maximum(polar(z), 1.0)[None]
    u_rep, primal, dual, gap, rel, res = certificate()
    if spec.mode == "rof":
        g_vals = np.where(mask, lam * (datum - u_rep), 0.0)
    else:
        g_vals = np.where(free, datum, 0.0)
    zf = VectorField(grid, z.copy())
    zf.check_feasible(spec.model)
    return SolveResult(
        u=ScalarField(grid, u_rep), z=zf, g=ScalarField(grid, g_vals),
        primal_energy=primal, dual_energy=dual, gap=gap, relative_gap=rel,
        iterations=it, converged=converged, divergence_residual=res,
        history=history, steps={"tau": tau, "sigma": sigma, "step_ratio": ratio})


# -- verification -----------------------------------------------------------------------------

def verify_subgradient(result, model):
    """Check that ``(u, z, g)`` is a calibrated subgradient pair.

    Reports the feasibility excess ``max(F°(x, z) - 1, 0)``, the divergence
    residual ``|div z + g|``, and the pairing residual
    ``R = sum (F(x, grad u) - z . grad u) h^d`` which is non-negative for
    feasible ``z`` and vanishes at optimality.
    """
    return calibration_report(result.u, result.z, result.g, model)


def calibration_report(u, z, g, model):
    """:func:`verify_subgradient` for an arbitrary triple ``(u, z, g)``."""
    grid = check_congruent(u, g, z)
    mask = grid.mask
    loc = _local(model, grid)
    z = z.values
    excess = float(np.max(np.maximum(_polar_fn(loc, grid)(z)[mask] - 1.0, 0.0)))
    div_z = backward_divergence(z, grid)
    r = (div_z + g.values)[mask]
    div_res = float(np.sqrt(np.sum(r**2) * grid.cell_volume))
    g_norm = float(np.sqrt(np.sum(g.values[mask] ** 2) * grid.cell_volume))
    grad = forward_difference(u.values, grid)
    fval = _value_fn(loc, grid)(grad)
    cell = (fval - np.einsum("k...,k...->...", z, grad))[mask]
    tv = float(fval[mask].sum() * grid.cell_volume)
    pairing = float(cell.sum() * grid.cell_volume)
    return CalibrationReport(
        feasibility_excess=excess,
        divergence_residual=div_res,
        divergence_residual_relative=div_res / g_norm if g_norm > 0 else div_res,
        pairing_residual=pairing,
        pairing_residual_relative=pairing / tv if tv > 0 else pairing,
        min_cell_pairing=float(cell.min() * grid.cell_volume) if cell.size else 0.0,
        total_variation=tv,
    )


def subgradient_slack(result, model, n_perturbations=20, seed=0, amplitude=None):
    """Evaluate ``J(v) - J(u) - <g, v - u>`` for random perturbations ``v`` of ``u``.

    Half the perturbations are white noise, half are smooth random Fourier
    modes; all are restricted to the domain. Returns the array of slacks,
    which must be non-negative (up to the certificate's gap) when
    ``g`` is a subgradient of ``J`` at ``u``.
    """
    grid = result.u.grid
    rng = np.random.default_rng(seed)
    u = result.u
    span = float(np.ptp(u.values[grid.mask])) or 1.0
    amp = span * 0.1 if amplitude is None else amplitude
    ju = total_variation(u, model)
    slacks = []
    for k in range(n_perturbations):
        if k % 2 == 0:
            w = rng.standard_normal(grid.shape)
        else:
            w = np.zeros(grid.shape)
            for _ in range(4):
                freq = rng.integers(1, 6, size=grid.dim)
                phase = rng.random(grid.dim) * 2 * np.pi
                mode = np.ones(grid.shape)
                for ax in range(grid.dim):
                    mode = mode * np.cos(freq[ax] * np.pi * grid.centers[ax] + phase[ax])
                w += rng.standard_normal() * mode
        w = np.where(grid.mask, amp * rng.random() * w / max(np.abs(w).max(), 1e-300), 0.0)
        v = ScalarField(grid, u.values + w)
        lin = float(np.sum((result.g.values * w)[grid.mask]) * grid.cell_volume)
        slacks.append(total_variation(v, model) - ju - lin)
    return np.array(slacks)
