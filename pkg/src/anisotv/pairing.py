"""Discrete pairing ``[z, Du]``, normal traces and blow-up diagnostics."""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_point, check_positive, check_radii
from .exceptions import EmptyRegionError, NonReducedPointError, PreconditionError
from .geometry import boundary_normal
from .grid import (backward_divergence, check_congruent, cylinder_average,
                   forward_difference)


def _shift_back(u, axis):
    """``u(i + e_axis)``, zero past the last cell."""
    out = np.zeros_like(u)
    lo = [slice(None)] * u.ndim
    hi = [slice(None)] * u.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] = u[tuple(hi)]
    return out


def pairing_apply(z, u, psi):
    """``<[z, Du], psi> = -sum u psi div z h^d - sum u z . grad psi h^d``.

    In the second term ``u`` is read on the far side of each face, which is
    the discrete product rule that makes the result equal
    ``sum psi z . grad u h^d`` exactly.

    Raises
    ------
    PreconditionError
        If ``psi`` is non-zero outside the domain interior.
    """
    grid = check_congruent(z, u, psi)
    interior = grid.mask & ~grid.boundary_layer
    if np.any(psi.values[~interior] != 0):
        raise PreconditionError("psi must vanish on the boundary layer and outside the domain")
    div_z = backward_divergence(z.values, grid)
    first = -np.sum(u.values * psi.values * div_z)
    gpsi = forward_difference(psi.values, grid)
    second = -sum(np.sum(_shift_back(u.values, k) * z.values[k] * gpsi[k]) for k in range(grid.dim))
    return float((first + second) * grid.cell_volume)


def pairing_density(z, u, psi):
    """Direct form ``sum psi z . grad u h^d``."""
    grid = check_congruent(z, u, psi)
    grad = forward_difference(u.values, grid)
    return float(np.sum(psi.values * np.einsum("k...,k...->...", z.values, grad)) * grid.cell_volume)


def normal_trace(z, E, x, rho, r=None, normal=None, threshold=0.5):
    """Cylinder estimate of ``[z, nu^E](x)``.

    The axis is the inward normal estimated from ``E`` in ``B_rho(x)``
    unless ``normal`` is supplied. ``r`` defaults to ``rho / 4``.

    Raises
    ------
    NonReducedPointError
        If the normal estimate has norm ratio below ``threshold``.
    """
    rho = check_positive(rho, "rho")
    r = rho / 4 if r is None else check_positive(r, "r")
    if normal is None:
        est = boundary_normal(E, x, rho, threshold)
        if not est.is_reduced:
            raise NonReducedPointError(
                f"normal estimate ratio {est.ratio:.3f} below {threshold}; not a reduced-boundary point")
        normal = est.normal
    return cylinder_average(z, x, normal, r, rho)


@dataclass
class BlowupSeries:
    """Ball averages ``z_rho(x)`` and mean oscillations over decreasing radii.

    Attributes
    ----------
    center : ndarray
    radii : ndarray
    averages : ndarray, shape (n_radii, d)
    oscillations : ndarray
        Mean of ``|z - z_rho|`` over each ball.
    field_max : float
        ``max |z|`` over the domain, the scale of the Lebesgue-like test.
    reference : ndarray, optional
        Expected limit ``grad_p F(x, nu)``.
    normal : ndarray, optional
        The normal estimate that produced ``reference``.
    """

    center: np.ndarray
    radii: np.ndarray
    averages: np.ndarray
    oscillations: np.ndarray
    field_max: float
    reference: Optional[np.ndarray] = None
    normal: Optional[np.ndarray] = None
    osc_fraction: float = 0.1
    extra: dict = field(default_factory=dict)

    def oscillation_decreasing(self, strict=False, tol=1e-12):
        d = np.diff(self.oscillations)
        return bool(np.all(d < 0)) if strict else bool(np.all(d <= tol * max(self.field_max, 1.0)))

    @property
    def lebesgue_like(self):
        """Oscillations non-increasing over at least three radii and the last one small."""
        if len(self.radii) < 3:
            return False
        small = self.oscillations[-1] <= self.osc_fraction * self.field_max + 1e-15
        return self.oscillation_decreasing() and bool(small)

    def residuals(self):
        """``|z_rho - reference|`` per radius (requires ``reference``)."""
        if self.reference is None:
            raise PreconditionError("series has no reference vector")
        return np.linalg.norm(self.averages - self.reference, axis=1)

    def rows(self):
        d = self.averages.shape[1]
        header = ["radius"] + [f"avg_{k}" for k in range(d)] + ["oscillation"]
        body = [[float(r), *map(float, a), float(o)]
                for r, a, o in zip(self.radii, self.averages, self.oscillations)]
        return header, body

    def to_csv(self, path):
        header, body = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(body)

    def to_dict(self):
        out = {
            "center": self.center.tolist(),
            "radii": self.radii.tolist(),
            "averages": self.averages.tolist(),
            "oscillations": self.oscillations.tolist(),
            "lebesgue_like": self.lebesgue_like,
        }
        if self.reference is not None:
            out["reference"] = self.reference.tolist()
            out["residuals"] = self.residuals().tolist()
        if self.normal is not None:
            out["normal"] = self.normal.tolist()
        return out


def blowup(z, x, radii, osc_fraction=0.1):
    """Ball averages and oscillations of ``z`` at ``x`` for decreasing ``radii`` (each ``>= 2h``)."""
    grid = z.grid
    x = check_point(x, grid.dim, "x")
    radii = check_radii(radii, 2 * grid.spacing)
    avgs, oscs = [], []
    for rho in radii:
        sl, sel = grid.ball_cells(x, rho)
        if not sel.any():
            raise EmptyRegionError(f"ball of radius {rho} contains no domain cell")
        vals = z.values[(slice(None),) + sl][:, sel]
        # offset by one sample so that constant fields average exactly
        base = vals[:, :1]
        mean = base[:, 0] + (vals - base).mean(axis=1)
        avgs.append(mean)
        oscs.append(np.linalg.norm(vals - mean[:, None], axis=0).mean())
    return BlowupSeries(x, radii, np.array(avgs), np.array(oscs), z.max_norm(),
                        osc_fraction=osc_fraction)


@dataclass
class ZeqnuCheck:
    """Outcome of :func:`verify_zeqnu`."""

    residual: float
    series: BlowupSeries
    normal_ratio: float


def verify_zeqnu(z, E, model, x, radii, normal_radius=None, threshold=0.5):
    """Compare ``z_rho(x)`` at the smallest radius with ``grad_p F(x, nu)``.

    ``nu`` is the inward normal of ``E`` estimated in ``B_{normal_radius}(x)``
    (default ``8h``).

    Raises
    ------
    NonReducedPointError
        If the normal estimate is degenerate.
    """
    grid = z.grid
    x = check_point(x, grid.dim, "x")
    rho_n = 8 * grid.spacing if normal_radius is None else check_positive(normal_radius, "normal_radius")
    est = boundary_normal(E, x, rho_n, threshold)
    if not est.is_reduced:
        raise NonReducedPointError(f"normal estimate ratio {est.ratio:.3f} below {threshold}")
    loc = model.local(x[None] if model.depends_on_x else None)
    ref = np.asarray(loc.grad(est.normal[None]))[0]
    series = blowup(z, x, radii)
    series.reference = ref
    series.normal = est.normal
    return ZeqnuCheck(float(series.residuals()[-1]), series, est.ratio)
