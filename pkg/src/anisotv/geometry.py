"""Level sets of grid functions and their measure-geometric diagnostics.

A level set is stored as a boolean cell mask. Its discrete boundary is the set
of domain faces ``(i, i + e_k)`` across which the mask changes; the jump of
``chi_E`` across such a face points into ``E``, so every normal produced here
is the inward one.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import check_point, check_positive, check_radii
from .exceptions import EmptyRegionError, InvalidInputError
from .grid import ScalarField, forward_difference, unit_ball_volume

REDUCED_RATIO = 0.5


@dataclass(eq=False)
class LevelSetView:
    """The set ``{u > s}`` (``strict``) or ``{u >= s}`` of a scalar field.

    Attributes
    ----------
    grid : GridSpec
    mask : ndarray of bool
        Cells of ``E``; always a subset of the domain.
    threshold : float
    strict : bool
    """

    grid: object
    mask: np.ndarray
    threshold: float = np.nan
    strict: bool = True

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise InvalidInputError("level-set mask does not match the grid")
        self.mask = m & self.grid.mask

    @classmethod
    def from_mask(cls, grid, mask):
        return cls(grid, mask)

    @cached_property
    def jumps(self):
        """Per-axis jumps ``chi(i + e_k) - chi(i)`` across domain faces, shape ``(d, *shape)``."""
        return forward_difference(self.mask.astype(float), self.grid) * self.grid.spacing

    @cached_property
    def boundary_cells(self):
        """Indices of domain cells adjacent to a face where the mask changes."""
        grid = self.grid
        flag = np.zeros(grid.shape, dtype=bool)
        for k in range(grid.dim):
            jump = self.jumps[k] != 0
            flag |= jump
            sl_to = [slice(None)] * grid.dim
            sl_from = [slice(None)] * grid.dim
            sl_to[k] = slice(1, None)
            sl_from[k] = slice(0, -1)
            flag[tuple(sl_to)] |= jump[tuple(sl_from)]
        return np.argwhere(flag)

    @cached_property
    def boundary_faces(self):
        """``(midpoints, inward_normals)`` of all jump faces, each of shape ``(n, d)``."""
        grid = self.grid
        pts, nrm = [], []
        for k in range(grid.dim):
            idx = np.argwhere(self.jumps[k] != 0)
            if idx.size == 0:
                continue
            mid = np.asarray(grid.origin) + (idx + 0.5) * grid.spacing
            mid[:, k] += 0.5 * grid.spacing
            n = np.zeros_like(mid)
            n[:, k] = self.jumps[k][tuple(idx.T)]
            pts.append(mid)
            nrm.append(n)
        if not pts:
            d = grid.dim
            return np.zeros((0, d)), np.zeros((0, d))
        return np.concatenate(pts), np.concatenate(nrm)

    @property
    def is_trivial(self):
        """True when the set is empty or fills the domain."""
        return not self.mask.any() or bool(np.all(self.mask[self.grid.mask]))

    def volume(self):
        return float(self.mask.sum() * self.grid.cell_volume)


def upper_level_set(u, s, strict=True):
    """Cellwise threshold of ``u``: ``{u > s}`` if ``strict`` else ``{u >= s}``."""
    s = float(s)
    mask = u.values > s if strict else u.values >= s
    return LevelSetView(u.grid, mask, s, bool(strict))


def boundary_points(E, n=None, center=None):
    """Face midpoints on the boundary of ``E`` ordered by angle about ``center``.

    ``center`` defaults to the centroid of ``E``. With ``n`` given, returns
    ``n`` points evenly spaced along that ordering. The angle uses the first
    two coordinates.
    """
    pts, _ = E.boundary_faces
    if len(pts) == 0:
        raise EmptyRegionError("set has no boundary faces")
    if center is None:
        center = E.grid.points[E.mask].mean(axis=0)
    rel = pts - np.asarray(center, dtype=float)
    order = np.lexsort((rel[:, -1], np.arctan2(rel[:, 1], rel[:, 0])))
    pts = pts[order]
    if n is None or n >= len(pts):
        return pts
    return pts[np.linspace(0, len(pts) - 1, int(n), endpoint=False).round().astype(int)]


def density_ratio(E, x, rho):
    """``|E ∩ B_rho(x)| / |B_rho(x) ∩ Ω|`` by counting cell centres."""
    grid = E.grid
    x = check_point(x, grid.dim, "x")
    rho = check_positive(rho, "rho")
    sl, sel = grid.ball_cells(x, rho)
    total = int(sel.sum())
    if total == 0:
        raise EmptyRegionError("ball contains no domain cell")
    return float(E.mask[sl][sel].sum()) / total


@dataclass(frozen=True)
class NormalEstimate:
    """Inward normal from ``D chi_E(B_rho(x))``.

    ``ratio = |D chi_E(B)| / |D chi_E|(B)`` lies in ``[0, 1]``; it is close to
    one at reduced-boundary points and small where the boundary is ragged.
    ``normal`` is zero when the vector measure of the ball vanishes.
    """

    normal: np.ndarray
    ratio: float
    is_reduced: bool
    faces: int


def boundary_normal(E, x, rho, threshold=REDUCED_RATIO):
    """Normalised sum of inward face normals over the faces whose midpoints lie in ``B_rho(x)``.

    Raises
    ------
    EmptyRegionError
        If no boundary face lies in the ball.
    """
    x = check_point(x, E.grid.dim, "x")
    rho = check_positive(rho, "rho")
    pts, nrm = E.boundary_faces
    inside = np.sum((pts - x) ** 2, axis=1) < rho**2
    if not inside.any():
        raise EmptyRegionError("no boundary face in the ball")
    vec = nrm[inside].sum(axis=0)
    total = np.abs(nrm[inside]).sum()
    length = float(np.linalg.norm(vec))
    ratio = length / total
    normal = vec / length if length > 0 else np.zeros_like(vec)
    return NormalEstimate(normal, ratio, ratio >= threshold, int(inside.sum()))


PERIMETER_METHODS = ("tv", "faces")


def perimeter(E, model, method="tv"):
    """Discrete anisotropic perimeter ``P_F(E)``.

    Parameters
    ----------
    method : {'tv', 'faces'}
        ``'tv'`` evaluates the discrete total variation ``J(chi_E)``, so that
        the coarea sum of a binary function reproduces ``J`` exactly.
        ``'faces'`` sums ``F(x_face, nu_face) h^{d-1}`` over the jump faces,
        which is the crystalline perimeter of the staircase boundary.
    """
    from .solver import total_variation

    if method == "tv":
        return total_variation(ScalarField(E.grid, E.mask.astype(float)), model)
    if method != "faces":
        raise InvalidInputError(f"method must be one of {PERIMETER_METHODS}")
    pts, nrm = E.boundary_faces
    if len(pts) == 0:
        return 0.0
    loc = model.local(pts if model.depends_on_x else None)
    return float(loc.value(nrm).sum() * E.grid.spacing ** (E.grid.dim - 1))


def coarea_check(u, model, n_thresholds=128, method="tv"):
    """Relative mismatch between ``sum_k P_F({u > s_k}) ds`` and ``J(u)``.

    Thresholds are the midpoints of ``n_thresholds`` equal bins spanning
    ``[min u, max u]`` over the domain. A constant ``u`` returns 0.
    """
    from .solver import total_variation

    n = int(n_thresholds)
    if n < 2:
        raise InvalidInputError("n_thresholds must be >= 2")
    vals = u.values[u.grid.mask]
    lo, hi = float(vals.min()), float(vals.max())
    tv = total_variation(u, model)
    if hi == lo:
        return 0.0
    ds = (hi - lo) / n
    levels = lo + (np.arange(n) + 0.5) * ds
    total = sum(perimeter(upper_level_set(u, s), model, method) for s in levels) * ds
    if tv == 0:
        return float(abs(total))
    return abs(total - tv) / tv


def theta_indicator(u, x, radii):
    """``min_rho rho^{1-d} sum_{B_rho(x)} |grad u| h^d`` over the given radii.

    Positive limits flag jump points; the value decays like ``rho`` where
    ``u`` is Lipschitz.
    """
    grid = u.grid
    x = check_point(x, grid.dim, "x")
    radii = check_radii(radii, 2 * grid.spacing)
    grad = forward_difference(u.values, grid)
    mag = np.sqrt(np.einsum("k...,k...->...", grad, grad))
    vals = []
    for rho in radii:
        sl, sel = grid.ball_cells(x, rho)
        vals.append(rho ** (1 - grid.dim) * mag[sl][sel].sum() * grid.cell_volume)
    return float(min(vals))


def step_theta_reference(jump, dim):
    """Continuum value of :func:`theta_indicator` on a flat jump of height ``jump``."""
    return abs(jump) * unit_ball_volume(dim - 1)


def levels_through_cell(u, index):
    """Thresholds ``s`` for which cell ``index`` borders a face of ``{u > s}``.

    Returns the half-open intervals ``[lo, hi)`` given by the values of ``u``
    on either side of each domain face at the cell; the union is non-empty
    exactly when ``u`` is not locally constant there.
    """
    grid = u.grid
    idx = tuple(int(i) for i in index)
    out = []
    for k in range(grid.dim):
        for step in (-1, 1):
            nb = list(idx)
            nb[k] += step
            if not 0 <= nb[k] < grid.shape[k] or not grid.mask[tuple(nb)]:
                continue
            a, b = u.values[idx], u.values[tuple(nb)]
            if a != b:
                out.append((float(min(a, b)), float(max(a, b))))
    return out
