"""Closed-form data and reference solutions used as independent oracles."""

import numpy as np

from .grid import ScalarField, VectorField


def disc_datum(grid, radius=0.25, center=None, height=1.0):
    """Indicator of the ball ``B_radius(center)`` scaled by ``height``."""
    c = _center(grid, center)
    r2 = np.sum((grid.points - c) ** 2, axis=-1)
    return ScalarField(grid, height * (r2 < radius**2))


def stripe_datum(grid, level=0.5, axis=0, height=1.0):
    """``height`` times the indicator of ``{x_axis > level}``."""
    return ScalarField(grid, height * (grid.points[..., axis] > level))


def rof_disc_plateau(lam, radius, dim=2):
    """Value of the Euclidean ROF solution on a ball datum: ``1 - d / (lam R)``."""
    return 1.0 - dim / (lam * radius)


def rof_stripe_levels(lam, level=0.5, length=1.0):
    """Two-level ROF solution for a stripe datum on a Neumann box of side ``length``.

    One interface of unit measure per unit cross-section: the low side rises by
    ``1 / (lam * level)`` and the high side drops by ``1 / (lam * (length - level))``.
    """
    return 1.0 / (lam * level), 1.0 - 1.0 / (lam * (length - level))


def disc_calibration(grid, radius=0.25, center=None):
    """Exact calibration of a Euclidean ball, inward orientation.

    ``z(x) = -(x - c) / R`` inside the ball and ``-R (x - c) / |x - c|^2``
    outside (2-d; in 3-d the outside field is ``-R^2 (x - c) / |x - c|^3``),
    so that ``-div z = d / R`` in the ball, ``0`` outside, and ``z`` equals
    the inward unit normal on the sphere. Values are sampled at cell centres,
    which keeps ``|z| <= 1`` exact on every cell.
    """
    c = _center(grid, center)
    y = grid.points - c
    r = np.sqrt(np.sum(y**2, axis=-1))
    d = grid.dim
    safe = np.maximum(r, 1e-300)
    outside = -(radius ** (d - 1)) * y / safe[..., None] ** d
    z = np.where((r < radius)[..., None], -y / radius, outside)
    return VectorField(grid, np.moveaxis(z, -1, 0))


def _center(grid, center):
    if center is None:
        lo = np.asarray(grid.origin)
        return lo + 0.5 * grid.spacing * np.asarray(grid.shape)
    return np.asarray(center, dtype=float)
