"""A calibration of the flat half-ball whose ball averages oscillate at the origin.

On ``Omega = B_1(0)`` the field equals ``e_d`` except inside the balls
``B_n = B_{r_n}(x_n)`` with ``x_n = 2 r_n e_d``, where it is
``(|x - x_n| / r_n) e_d``. It is continuous, ``|z| <= 1``, and
``div z = (x_d - x_{n,d}) / (r_n |x - x_n|)`` in ``B_n``, so
``div z`` lies in ``L^{d - eps}`` but not in ``L^d`` when the radii
shrink fast enough. All balls sit in ``{x_d >= r_n}``, hence ``z = e_d``
on the flat boundary ``{x_d = 0}``.

Quadrature works ball by ball: the deficit ``1 - z . e_d`` vanishes outside
the balls, so every average over a larger region reduces to integrals over
the ``B_n`` clipped to that region.
"""

import warnings
from dataclasses import dataclass
from math import gamma, pi, sqrt

import numpy as np

from .exceptions import ConstructionInvalidError, DomainError, InvalidInputError, PreconditionError
from .grid import VectorField, unit_ball_volume

QUAD_TOL = 1e-3


@dataclass(frozen=True)
class CounterexampleConfig:
    """Dimension, exponent gap, tail tolerance and the radius sequence.

    Parameters
    ----------
    dim : {2, 3}
    epsilon : float
        ``div z`` is tested in ``L^{d - epsilon}``; ``0 < epsilon < 1``.
    delta : float
        Tail tolerance with ``delta + 2 * QUAD_TOL < 6^{-d}``.
    radii : tuple of float
        ``r_n`` for the materialised balls, each below a quarter of the previous one.
    first_index : int
        Label ``n`` of ``radii[0]`` (used only in reports).

    Raises
    ------
    ConstructionInvalidError
        When the radii are not admissible or the tail condition
        ``sum_{i>n} r_i^d <= delta r_n^d`` fails.
    """

    dim: int
    epsilon: float
    delta: float
    radii: tuple
    first_index: int = 1

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConstructionInvalidError("dimension must be 2 or 3")
        if not 0 < self.epsilon < 1:
            raise ConstructionInvalidError("epsilon must lie in (0, 1)")
        bound = 6.0 ** -self.dim
        if not 0 < self.delta < bound:
            raise ConstructionInvalidError(f"delta must lie in (0, 6^-d) = (0, {bound:.6g})")
        if self.delta + 2 * QUAD_TOL >= bound:
            raise ConstructionInvalidError(
                f"delta + 2*{QUAD_TOL} must stay below 6^-d = {bound:.6g} for a certified gap")
        r = tuple(float(x) for x in self.radii)
        object.__setattr__(self, "radii", r)
        if any(not np.isfinite(x) or x <= 0 for x in r):
            raise ConstructionInvalidError("radii must be positive")
        if r and 3 * r[0] > 1:
            raise ConstructionInvalidError("the first ball must lie in the unit ball (3 r_1 <= 1)")
        for a, b in zip(r, r[1:]):
            if not b < a / 4:
                raise ConstructionInvalidError(f"radii must satisfy r_(n+1) < r_n / 4 ({b} vs {a})")
        for n in range(len(r)):
            tail = sum(x**self.dim for x in r[n + 1:])
            if tail > self.delta * r[n] ** self.dim:
                raise ConstructionInvalidError(
                    f"tail condition fails at ball {n}: {tail:.3g} > delta r_n^d")

    @classmethod
    def default(cls, dim=2, delta=None, epsilon=0.5, first=2, last=6):
        """Radii ``r_n = 2^{-2^n}`` for ``n = first..last``; ``delta`` defaults to 0.01 (2-d) or 0.001 (3-d)."""
        if delta is None:
            delta = 0.01 if dim == 2 else 1e-3
        if last < first - 1:
            raise InvalidInputError("last must be >= first - 1")
        radii = tuple(2.0 ** -(2.0**n) for n in range(first, last + 1))
        return cls(dim, epsilon, delta, radii, first)

    @property
    def depth(self):
        return len(self.radii)

    def centers(self):
        c = np.zeros((self.depth, self.dim))
        c[:, -1] = 2 * np.asarray(self.radii)
        return c

    def balls_disjoint(self):
        """Exact pairwise check from centres and radii (touching counts as disjoint)."""
        c, r = self.centers(), self.radii
        for i in range(self.depth):
            for j in range(i + 1, self.depth):
                if np.linalg.norm(c[i] - c[j]) < r[i] + r[j]:
                    return False
        return True

    def describe(self):
        return {"dim": self.dim, "epsilon": self.epsilon, "delta": self.delta,
                "radii": list(self.radii), "first_index": self.first_index}


def eval_field(cfg, x):
    """``z(x)`` for points of shape ``(..., d)`` with ``|x| <= 1``.

    Raises
    ------
    DomainError
        If any point lies outside the closed unit ball.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cfg.dim:
        raise InvalidInputError(f"points must have trailing dimension {cfg.dim}")
    if np.any(np.sum(x**2, axis=-1) > 1 + 1e-14):
        raise DomainError("the field is defined on the unit ball only")
    return _field(cfg, x)


def _field(cfg, x):
    scale = np.ones(x.shape[:-1])
    for c, r in zip(cfg.centers(), cfg.radii):
        dist = np.sqrt(np.sum((x - c) ** 2, axis=-1))
        inside = dist < r
        scale = np.where(inside, dist / r, scale)
    out = np.zeros(x.shape)
    out[..., -1] = scale
    return out


def eval_divergence(cfg, x):
    """Analytic ``div z``: ``(x_d - 2 r_n) / (r_n |x - x_n|)`` in ``B_n``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for c, r in zip(cfg.centers(), cfg.radii):
        y = x - c
        dist = np.sqrt(np.sum(y**2, axis=-1))
        inside = (dist < r) & (dist > 0)
        out = np.where(inside, y[..., -1] / (r * np.where(dist > 0, dist, 1.0)), out)
    return out


# -- unit-ball product quadrature ----------------------------------------------

def _unit_ball_nodes(dim, n_nodes):
    """Midpoint radial-angular nodes ``(points, weights)`` on the unit ball.

    Weights sum to the exact ball volume up to the midpoint error.
    """
    if dim == 2:
        k = max(int(round(sqrt(n_nodes))), 4)
        s = (np.arange(k) + 0.5) / k
        t = (np.arange(k) + 0.5) / k * 2 * pi
        S, T = np.meshgrid(s, t, indexing="ij")
        pts = np.stack([S * np.cos(T), S * np.sin(T)], axis=-1).reshape(-1, 2)
        w = (S / k * (2 * pi / k)).reshape(-1)
        return pts, w
    k = max(int(round(n_nodes ** (1 / 3))), 4)
    s = (np.arange(k) + 0.5) / k
    th = (np.arange(k) + 0.5) / k * pi
    ph = (np.arange(2 * k) + 0.5) / (2 * k) * 2 * pi
    S, TH, PH = np.meshgrid(s, th, ph, indexing="ij")
    pts = np.stack([S * np.sin(TH) * np.cos(PH), S * np.sin(TH) * np.sin(PH), S * np.cos(TH)], axis=-1)
    w = S**2 * np.sin(TH) / k * (pi / k) * (pi / k)
    return pts.reshape(-1, 3), w.reshape(-1)


def sphere_cos_moment(dim, p):
    """``int_{S^{d-1}} |cos theta|^p`` in closed form."""
    if dim == 2:
        return 2 * sqrt(pi) * gamma((p + 1) / 2) / gamma(p / 2 + 1)
    if dim == 3:
        return 4 * pi / (p + 1)
    raise InvalidInputError("dimension must be 2 or 3")


def div_lp_norm(cfg, p=None, quadrature_per_ball=10_000):
    """Truncated ``int |div z|^p`` summed over the materialised balls.

    ``p`` defaults to ``d - epsilon``. For ``p >= d`` a ``RuntimeWarning`` is
    issued: the per-ball contributions no longer decay and the full series
    diverges.
    """
    p = cfg.dim - cfg.epsilon if p is None else float(p)
    if p >= cfg.dim:
        warnings.warn(f"p = {p} >= d: div z is not p-integrable; returning the truncated sum",
                      RuntimeWarning, stacklevel=2)
    pts, w = _unit_ball_nodes(cfg.dim, quadrature_per_ball)
    rad = np.linalg.norm(pts, axis=1)
    cos = np.abs(pts[:, -1]) / rad
    total = 0.0
    for r in cfg.radii:
        # in B_n: |div z| = |cos| / r_n; node volume scales by r_n^d
        total += float(np.sum(w * (cos / r) ** p)) * r**cfg.dim
    return total


def div_lp_bound(cfg):
    """``omega_d sum r_n^eps``, the upper bound for :func:`div_lp_norm` at ``p = d - eps``."""
    return unit_ball_volume(cfg.dim) * sum(r**cfg.epsilon for r in cfg.radii)


def _mean_over_ball(cfg, radius, n_nodes):
    """Mean of ``z . e_d`` over ``B_radius(0)``."""
    if radius > 1:
        raise DomainError("averaging ball must lie in the unit ball")
    pts, w = _unit_ball_nodes(cfg.dim, n_nodes)
    rad = np.linalg.norm(pts, axis=1)
    vol = unit_ball_volume(cfg.dim) * radius**cfg.dim
    deficit = 0.0
    for c, r in zip(cfg.centers(), cfg.radii):
        dist_c = np.linalg.norm(c)
        if dist_c - r >= radius:
            continue
        y = c + r * pts
        inside = np.sum(y**2, axis=1) < radius**2
        deficit += float(np.sum(w * (1 - rad) * inside)) * r**cfg.dim
    return 1.0 - deficit / vol


def _check_index(cfg, n, upper):
    if not isinstance(n, (int, np.integer)) or not 0 <= n < upper:
        raise PreconditionError(f"ball index must be an integer in [0, {upper})")


def average_large_ball(cfg, n, quadrature=10_000):
    """Mean of ``z . e_d`` over ``B_{3 r_n}(0)``; ``n`` indexes ``cfg.radii`` from 0."""
    _check_index(cfg, n, cfg.depth)
    return _mean_over_ball(cfg, 3 * cfg.radii[n], quadrature)


def average_small_ball(cfg, n, quadrature=10_000):
    """Mean of ``z . e_d`` over ``B_{r_n}(0)``; needs a deeper ball, so ``n < depth - 1``."""
    _check_index(cfg, n, cfg.depth - 1)
    return _mean_over_ball(cfg, cfg.radii[n], quadrature)


def large_ball_exact(cfg, n):
    """Closed form ``1 - sum_{i >= n} (r_i / 3 r_n)^d / (d + 1)``."""
    r, d = cfg.radii, cfg.dim
    return 1.0 - sum((ri / (3 * r[n])) ** d for ri in r[n:]) / (d + 1)


def small_ball_exact(cfg, n):
    """Closed form ``1 - sum_{i > n} (r_i / r_n)^d / (d + 1)``."""
    r, d = cfg.radii, cfg.dim
    return 1.0 - sum((ri / r[n]) ** d for ri in r[n + 1:]) / (d + 1)


def lebesgue_failure_report(cfg, quadrature=10_000):
    """Both average sequences, the bounds on them and the certified oscillation gap.

    Raises
    ------
    PreconditionError
        With fewer than three balls.
    ConstructionInvalidError
        If any bound or the gap ``max small - min large >= 6^{-d} - delta - 2 tol`` fails.
    """
    if cfg.depth < 3:
        raise PreconditionError("the report needs at least three balls")
    d = cfg.dim
    large = [average_large_ball(cfg, n, quadrature) for n in range(cfg.depth)]
    small = [average_small_ball(cfg, n, quadrature) for n in range(cfg.depth - 1)]
    large_bound = 1 - 6.0**-d + QUAD_TOL
    small_bound = 1 - cfg.delta - QUAD_TOL
    gap = max(small) - min(large)
    gap_bound = 6.0**-d - cfg.delta - 2 * QUAD_TOL
    report = {
        "config": cfg.describe(),
        "indices": [cfg.first_index + n for n in range(cfg.depth)],
        "large_ball_averages": large,
        "small_ball_averages": small,
        "large_ball_bound": large_bound,
        "small_ball_bound": small_bound,
        "gap": gap,
        "gap_bound": gap_bound,
        "div_lp_norm": div_lp_norm(cfg, quadrature_per_ball=quadrature),
        "div_lp_bound": div_lp_bound(cfg),
        "balls_disjoint": cfg.balls_disjoint(),
        "quadrature_tolerance": QUAD_TOL,
    }
    report["large_ok"] = all(v <= large_bound for v in large)
    report["small_ok"] = all(v >= small_bound for v in small)
    report["gap_ok"] = gap >= gap_bound
    report["lp_ok"] = report["div_lp_norm"] <= report["div_lp_bound"] * 1.01
    report["passed"] = all(report[k] for k in ("large_ok", "small_ok", "gap_ok", "lp_ok", "balls_disjoint"))
    if not report["passed"]:
        raise ConstructionInvalidError(f"counterexample bounds fail: {report}")
    return report


def rasterize(cfg, grid):
    """Sample ``z`` at the cell centres of ``grid``; cells outside the unit ball are masked out."""
    if grid.dim != cfg.dim:
        raise InvalidInputError("grid dimension does not match the configuration")
    pts = grid.points
    inside = np.sum(pts**2, axis=-1) <= 1.0
    grid = grid if np.all(inside[grid.mask]) else grid.with_mask(grid.mask & inside)
    vals = _field(cfg, np.where(inside[..., None], pts, 0.0))
    return VectorField(grid, np.moveaxis(vals, -1, 0))
