"""Uniform-grid fields and finite-difference calculus.

Vector fields live on the forward-staggered layout: component ``k`` of the
value stored at cell ``i`` belongs to the face between ``i`` and ``i + e_k``.
The gradient uses forward differences and the divergence is its exact
negative adjoint for the inner product ``sum(.) * h^d``.
"""

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi
from typing import Optional

import numpy as np

from ._validation import check_finite_array, check_point, check_positive
from .exceptions import EmptyRegionError, InvalidInputError


def unit_ball_volume(dim):
    """Volume of the unit ball in ``R^dim`` (``dim = 0`` gives 1)."""
    return pi ** (dim / 2) / gamma(dim / 2 + 1)


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Cell-centred uniform grid with a domain mask.

    Cell ``i`` has centre ``origin + (i + 1/2) * spacing``.
    """

    shape: tuple
    spacing: float
    origin: tuple = None
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) not in (2, 3) or min(shape) < 2:
            raise InvalidInputError(f"grid must be 2-d or 3-d with >= 2 cells per axis, got {shape}")
        h = check_positive(self.spacing, "spacing")
        origin = (0.0,) * len(shape) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != len(shape):
            raise InvalidInputError("origin must have one coordinate per axis")
        if self.mask is None:
            mask = np.ones(shape, dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != shape:
                raise InvalidInputError(f"mask shape {mask.shape} does not match grid {shape}")
            if not mask.any():
                raise InvalidInputError("mask must contain at least one cell")
        mask.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def regular(cls, cells, dim=2, length=1.0, origin=None, mask=None):
        """Grid of ``cells`` cells per axis covering a cube of side ``length``."""
        check_positive(length, "length")
        return cls((int(cells),) * dim, length / cells, origin, mask)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    @property
    def full(self):
        return bool(self.mask.all())

    def with_mask(self, mask):
        return GridSpec(self.shape, self.spacing, self.origin, mask)

    def axis_coordinates(self, axis):
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing

    @cached_property
    def centers(self):
        """Cell centres, shape ``(d, *shape)``."""
        axes = [self.axis_coordinates(k) for k in range(self.dim)]
        c = np.stack(np.meshgrid(*axes, indexing="ij"))
        c.setflags(write=False)
        return c

    @cached_property
    def points(self):
        """Cell centres with the coordinate axis last, shape ``(*shape, d)``."""
        return np.moveaxis(self.centers, 0, -1)

    @cached_property
    def edge_masks(self):
        """Per axis, float mask of faces ``(i, i + e_k)`` with both cells in the domain."""
        out = []
        for k in range(self.dim):
            m = np.zeros(self.shape)
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[k] = slice(0, -1)
            hi[k] = slice(1, None)
            m[tuple(lo)] = self.mask[tuple(lo)] & self.mask[tuple(hi)]
            m.setflags(write=False)
            out.append(m)
        return tuple(out)

    @cached_property
    def boundary_layer(self):
        """Domain cells with a face-neighbour outside the domain or the array."""
        inner = self.mask.copy()
        for k in range(self.dim):
            em = self.edge_masks[k].astype(bool)
            back = np.zeros_like(em)
            sl_lo = [slice(None)] * self.dim
            sl_hi = [slice(None)] * self.dim
            sl_lo[k] = slice(1, None)
            sl_hi[k] = slice(0, -1)
            back[tuple(sl_lo)] = em[tuple(sl_hi)]
            inner &= em & back
        layer = self.mask & ~inner
        layer.setflags(write=False)
        return layer

    def index_of(self, point):
        """Index of the cell containing ``point`` (clipped to the array)."""
        p = check_point(point, self.dim)
        idx = np.floor((p - np.asarray(self.origin)) / self.spacing).astype(int)
        return tuple(np.clip(idx, 0, np.asarray(self.shape) - 1))

    def box_slices(self, center, radius):
        """Array slices covering the axis-aligned box around a ball."""
        c = np.asarray(center, dtype=float)
        o = np.asarray(self.origin)
        lo = np.floor((c - radius - o) / self.spacing - 0.5).astype(int)
        hi = np.ceil((c + radius - o) / self.spacing - 0.5).astype(int) + 1
        lo = np.clip(lo, 0, self.shape)
        hi = np.clip(hi, 0, self.shape)
        return tuple(slice(a, b) for a, b in zip(lo, hi))

    def ball_cells(self, center, radius):
        """``(slices, selector)`` for domain cells whose centre lies in the open ball."""
        sl = self.box_slices(center, radius)
        offsets = self.centers[(slice(None),) + sl] - np.asarray(center, dtype=float).reshape((-1,) + (1,) * self.dim)
        inside = np.einsum("k...,k...->...", offsets, offsets) < radius**2
        return sl, inside & self.mask[sl]

    def describe(self):
        return {"shape": list(self.shape), "spacing": self.spacing,
                "origin": list(self.origin), "masked_cells": int(self.mask.sum())}


@dataclass(eq=False)
class ScalarField:
    """Per-cell scalar values on a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise InvalidInputError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v[self.grid.mask])):
            raise InvalidInputError("scalar field has non-finite values in the domain")
        self.values = v

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _values(other))

    def __mul__(self, scalar):
        return ScalarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def integral(self):
        return float(self.values[self.grid.mask].sum() * self.grid.cell_volume)

    def norm(self):
        """Discrete L2 norm over the domain."""
        return float(np.sqrt((self.values[self.grid.mask] ** 2).sum() * self.grid.cell_volume))


@dataclass(eq=False)
class VectorField:
    """Per-cell ``d``-vectors, shape ``(d, *shape)``, forward-staggered.

    ``feasible`` records, when known, whether ``F°(x, z) <= 1 + tol`` holds
    on every domain cell.
    """

    grid: GridSpec
    values: np.ndarray
    feasible: Optional[bool] = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.dim,) + self.grid.shape:
            raise InvalidInputError(
                f"vector field must have shape {(self.grid.dim,) + self.grid.shape}, got {v.shape}")
        if not np.all(np.isfinite(v[:, self.grid.mask])):
            raise InvalidInputError("vector field has non-finite values in the domain")
        self.values = v

    @property
    def vectors(self):
        """Values with the component axis last, shape ``(*shape, d)``."""
        return np.moveaxis(self.values, 0, -1)

    def polar_norm(self, model):
        """``F°(x, z)`` at each cell centre."""
        return model.local(self.grid.points if model.depends_on_x else None).polar(self.vectors)

    def check_feasible(self, model, tol=1e-9):
        """Set and return the feasibility flag ``max F° <= 1 + tol`` on the domain."""
        self.feasible = bool(np.all(self.polar_norm(model)[self.grid.mask] <= 1.0 + tol))
        return self.feasible

    def dot(self, direction):
        d = np.asarray(direction, dtype=float).reshape((-1,) + (1,) * self.grid.dim)
        return ScalarField(self.grid, np.sum(self.values * d, axis=0))

    def max_norm(self):
        mags = np.sqrt(np.sum(self.values**2, axis=0))
        return float(mags[self.grid.mask].max())


def _values(other):
    return other.values if isinstance(other, (ScalarField, VectorField)) else other


# -- raw-array kernels (used by the solver on its hot path) --------------------

def forward_difference(u, grid, out=None):
    """Masked forward differences of an array, shape ``(d, *shape)``."""
    if out is None:
        out = np.zeros((grid.dim,) + grid.shape)
    h = grid.spacing
    full = grid.full
    for k in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(0, -1)
        hi[k] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        ok = out[k]
        np.subtract(u[hi], u[lo], out=ok[lo])
        last = [slice(None)] * grid.dim
        last[k] = -1
        ok[tuple(last)] = 0.0
        if not full:
            ok *= grid.edge_masks[k]
        ok /= h
    return out


def backward_divergence(z, grid, out=None):
    """Negative adjoint of :func:`forward_difference`."""
    if out is None:
        out = np.zeros(grid.shape)
    else:
        out[...] = 0.0
    h = grid.spacing
    full = grid.full
    for k in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(0, -1)
        hi[k] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        zk = z[k] if full else z[k] * grid.edge_masks[k]
        out[lo] += zk[lo]
        out[hi] -= zk[lo]
    out /= h
    return out


# -- public operations ------------------------------------------------------------

def gradient(u):
    """Forward-difference gradient with zero flux across the domain boundary."""
    return VectorField(u.grid, forward_difference(u.values, u.grid))


def divergence(z):
    """Backward-difference divergence; ``<div z, u> = -<z, grad u>`` exactly."""
    return ScalarField(z.grid, backward_divergence(z.values, z.grid))


def inner(a, b):
    """Discrete ``L^2`` inner product ``sum(a * b) * h^d`` of matching fields."""
    av, bv = _values(a), _values(b)
    return float(np.sum(av * bv) * a.grid.cell_volume)


def ball_average(field, center, radius):
    """Mean of the cell values whose centres lie in ``B_radius(center)`` and the domain.

    Returns a float for a :class:`ScalarField` and a ``(d,)`` array for a
    :class:`VectorField`.

    Raises
    ------
    EmptyRegionError
        If no domain cell centre falls in the ball.
    """
    grid = field.grid
    center = check_point(center, grid.dim, "center")
    radius = check_positive(radius, "radius")
    sl, sel = grid.ball_cells(center, radius)
    if not sel.any():
        raise EmptyRegionError(f"ball of radius {radius} at {center.tolist()} contains no domain cell")
    if isinstance(field, VectorField):
        return field.values[(slice(None),) + sl][:, sel].mean(axis=1)
    return float(field.values[sl][sel].mean())


def cylinder_cells(grid, x, alpha, r, rho):
    """Domain cells of ``C_{r,rho}(x, alpha)``: ``|t| < r`` along ``alpha``, lateral distance ``< rho``."""
    sl = grid.box_slices(x, np.hypot(r, rho))
    offsets = grid.centers[(slice(None),) + sl] - x.reshape((-1,) + (1,) * grid.dim)
    t = np.tensordot(alpha, offsets, axes=1)
    lateral = offsets - alpha.reshape((-1,) + (1,) * grid.dim) * t
    lat2 = np.einsum("k...,k...->...", lateral, lateral)
    return sl, (np.abs(t) < r) & (lat2 < rho**2) & grid.mask[sl]


def cylinder_average(z, x, alpha, r, rho):
    """Mean of ``z . alpha`` over the cylinder ``C_{r,rho}(x, alpha)``.

    This is the discrete form of ``(2 r w_{d-1} rho^{d-1})^{-1} int_C z . alpha``;
    with ``r << rho`` it estimates the normal trace ``[z, alpha](x)``.
    """
    grid = z.grid
    x = check_point(x, grid.dim, "x")
    alpha = check_point(alpha, grid.dim, "alpha")
    n = np.linalg.norm(alpha)
    if n == 0:
        raise InvalidInputError("alpha must be non-zero")
    alpha = alpha / n
    r = check_positive(r, "r")
    rho = check_positive(rho, "rho")
    sl, sel = cylinder_cells(grid, x, alpha, r, rho)
    if not sel.any():
        raise EmptyRegionError("cylinder contains no domain cell")
    zz = z.values[(slice(None),) + sl][:, sel]
    return float(np.mean(alpha @ zz))


def sample_field(grid, func):
    """Evaluate ``func`` at the cell centres (points with the coordinate axis last).

    Returns a :class:`ScalarField` for scalar output and a :class:`VectorField`
    when ``func`` returns ``d``-vectors.
    """
    vals = np.asarray(func(grid.points), dtype=float)
    if vals.shape == grid.shape:
        return ScalarField(grid, vals)
    if vals.shape == grid.shape + (grid.dim,):
        return VectorField(grid, np.moveaxis(vals, -1, 0))
    raise InvalidInputError(f"function returned shape {vals.shape}")


def check_congruent(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g and (f.grid.shape != g.shape or f.grid.spacing != g.spacing
                                or not np.array_equal(f.grid.mask, g.mask)):
            raise InvalidInputError("fields are defined on different grids")
    return g


def as_scalar_field(values, grid):
    return ScalarField(grid, check_finite_array(values, "values"))
