"""Boundary diagnostics shared by the CLI and the acceptance suite."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import AnisoTVError
from .geometry import boundary_normal, boundary_points, density_ratio, upper_level_set
from .pairing import normal_trace, verify_zeqnu


@dataclass
class BoundaryDiagnostics:
    """Per-point blow-up, trace and density measurements on one level set."""

    level: float
    points: np.ndarray
    zeqnu_residuals: np.ndarray
    oscillations: np.ndarray
    traces: np.ndarray
    trace_bounds: np.ndarray
    densities: np.ndarray
    normal_ratios: np.ndarray
    skipped: int
    parameters: dict = field(default_factory=dict)

    @property
    def monotone_mean_oscillation(self):
        """Mean oscillation across points (an L1 average along the boundary) strictly decreases."""
        return bool(np.all(np.diff(np.mean(self.oscillations, axis=0)) < 0))

    @property
    def monotone_median_oscillation(self):
        return bool(np.all(np.diff(np.median(self.oscillations, axis=0)) < 0))

    @property
    def monotone_fraction(self):
        """Fraction of points whose own oscillation sequence strictly decreases."""
        return float(np.mean(np.all(np.diff(self.oscillations, axis=1) < 0, axis=1)))

    def summary(self):
        return {
            "level": self.level,
            "n_points": int(len(self.points)),
            "skipped_non_reduced": self.skipped,
            "zeqnu_median": float(np.median(self.zeqnu_residuals)),
            "zeqnu_max": float(np.max(self.zeqnu_residuals)),
            "median_oscillation_by_radius": np.median(self.oscillations, axis=0).tolist(),
            "mean_oscillation_by_radius": np.mean(self.oscillations, axis=0).tolist(),
            "oscillation_monotone": self.monotone_mean_oscillation,
            "median_oscillation_monotone": self.monotone_median_oscillation,
            "oscillation_monotone_fraction": self.monotone_fraction,
            "trace_min": float(np.min(self.traces)),
            "trace_median": float(np.median(self.traces)),
            "trace_excess_max": float(np.max(self.traces - self.trace_bounds)),
            "density_min": float(np.min(self.densities)),
            "density_max": float(np.max(self.densities)),
            "parameters": dict(self.parameters),
        }


def midrange_level(u):
    v = u.values[u.grid.mask]
    return 0.5 * (float(v.min()) + float(v.max()))


def boundary_diagnostics(u, z, model, n_points=32, level=None, radii_cells=(32, 16, 8, 4),
                         normal_radius_cells=8, trace_rho_cells=16, trace_r_cells=4,
                         density_rho_cells=8):
    """Blow-up residuals, normal traces and density ratios at boundary points of ``{u > level}``.

    Radii are given in cells. Points whose normal estimate is degenerate are
    skipped and counted.
    """
    h = u.grid.spacing
    level = midrange_level(u) if level is None else float(level)
    E = upper_level_set(u, level)
    pts = boundary_points(E, n_points)
    radii = [c * h for c in radii_cells]
    res, osc, tr, bound, dens, ratios, kept = [], [], [], [], [], [], []
    skipped = 0
    for x in pts:
        try:
            chk = verify_zeqnu(z, E, model, x, radii, normal_radius=normal_radius_cells * h)
            nu = boundary_normal(E, x, trace_rho_cells * h).normal
            t = normal_trace(z, E, x, trace_rho_cells * h, trace_r_cells * h, normal=nu)
        except AnisoTVError:
            skipped += 1
            continue
        loc = model.local(x[None] if model.depends_on_x else None)
        kept.append(x)
        res.append(chk.residual)
        osc.append(chk.series.oscillations)
        ratios.append(chk.normal_ratio)
        tr.append(t)
        bound.append(float(loc.value(nu[None])[0]))
        dens.append(density_ratio(E, x, density_rho_cells * h))
    if not kept:
        raise AnisoTVError("no boundary point with a usable normal")
    params = {"n_points": n_points, "radii_cells": list(radii_cells),
              "normal_radius_cells": normal_radius_cells, "trace_rho_cells": trace_rho_cells,
              "trace_r_cells": trace_r_cells, "density_rho_cells": density_rho_cells}
    return BoundaryDiagnostics(level, np.array(kept), np.array(res), np.array(osc), np.array(tr),
                               np.array(bound), np.array(dens), np.array(ratios), skipped, params)
