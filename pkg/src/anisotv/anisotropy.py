"""Smooth elliptic one-homogeneous integrands ``F(x, p)`` and their polars.

Three families are supported, all with closed-form polar and gradients:

* ``euclidean``   ``F(x, p) = |p|``
* ``weighted``    ``F(x, p) = a(x) |p|`` with ``a > 0``
* ``riemannian``  ``F(x, p) = sqrt(p . A(x) p)`` with ``A`` symmetric positive
  definite, whose polar is ``sqrt(z . A(x)^{-1} z)``.

Vectors are stored along the trailing axis, so ``p`` of shape ``(..., d)``
broadcasts against points ``x`` of shape ``(..., d)``.
"""

import numpy as np

from ._validation import check_finite_array, check_vectors
from .exceptions import DegeneratePointError, InvalidInputError

KINDS = ("euclidean", "weighted", "riemannian")

# margin applied to sampled eigenvalue / weight bounds of x-dependent models
_BOUND_MARGIN = 0.99


def _matvec(A, v):
    return np.einsum("...ij,...j->...i", A, v)


def _root_form(v, A=None):
    """``sqrt(v . A v)`` (``A = I`` by default), rescaled by ``max |v_i|`` against under/overflow."""
    v = np.asarray(v, dtype=float)
    s = np.max(np.abs(v), axis=-1)
    safe = np.where(s > 0, s, 1.0)
    w = v / safe[..., None]
    q = np.einsum("...i,...i->...", w, w if A is None else _matvec(A, w))
    return s * np.sqrt(np.maximum(q, 0.0))


def _norm(v):
    return _root_form(v)


class LocalAnisotropy:
    """An anisotropy frozen at a fixed set of points.

    Coefficients (weights, matrices and inverses) are evaluated once, which
    is what the solver needs on a grid. Methods skip input validation.
    """

    def __init__(self, kind, dim, weight=None, matrix=None, inverse=None):
        self.kind = kind
        self.dim = dim
        self.weight = weight
        self.matrix = matrix
        self.inverse = inverse

    def value(self, p):
        if self.kind == "euclidean":
            return _norm(p)
        if self.kind == "weighted":
            return self.weight * _norm(p)
        return _root_form(p, self.matrix)

    def polar(self, z):
        if self.kind == "euclidean":
            return _norm(z)
        if self.kind == "weighted":
            return _norm(z) / self.weight
        return _root_form(z, self.inverse)

    def duality_map(self, p):
        """``F(p) * grad F(p)``, the gradient of ``F^2 / 2`` (linear for all kinds)."""
        if self.kind == "euclidean":
            return np.array(p, dtype=float, copy=True)
        if self.kind == "weighted":
            return (self.weight**2)[..., None] * p if np.ndim(self.weight) else self.weight**2 * p
        return _matvec(self.matrix, p)

    def polar_duality_map(self, z):
        """``F°(z) * grad F°(z)``; inverse of :meth:`duality_map`."""
        if self.kind == "euclidean":
            return np.array(z, dtype=float, copy=True)
        if self.kind == "weighted":
            return z / ((self.weight**2)[..., None] if np.ndim(self.weight) else self.weight**2)
        return _matvec(self.inverse, z)

    def grad(self, p):
        val = self.value(p)
        if np.any(val == 0):
            raise DegeneratePointError("gradient of F is undefined at p = 0")
        return self.duality_map(p) / val[..., None]

    def polar_grad(self, z):
        val = self.polar(z)
        if np.any(val == 0):
            raise DegeneratePointError("gradient of the polar is undefined at z = 0")
        return self.polar_duality_map(z) / val[..., None]

    def project(self, z):
        """Radial scaling ``z / max(1, F°(z))`` onto the unit polar ball."""
        scale = np.maximum(self.polar(z), 1.0)
        return z / scale[..., None]

    def dual_metric(self):
        """Per-point matrix making :meth:`project` an orthogonal projection.

        Radial scaling is the projection onto ``{F° <= 1}`` in the metric
        ``A^{-1}``; primal-dual steps must be preconditioned with ``A``.
        Returns ``None`` when the plain Euclidean metric already works.
        """
        return self.matrix if self.kind == "riemannian" else None


class AnisotropyModel:
    """Immutable description of ``F(x, p)``.

    Parameters
    ----------
    kind : {'euclidean', 'weighted', 'riemannian'}
    dim : int
        Space dimension, at least 2.
    weight : float or callable, optional
        For ``weighted``: constant ``a > 0`` or ``a(x)`` mapping points of
        shape ``(..., d)`` to shape ``(...)``.
    matrix : array_like or callable, optional
        For ``riemannian``: constant ``(d, d)`` SPD matrix or ``A(x)``
        returning shape ``(..., d, d)``.
    sample_box : tuple of (lo, hi), optional
        Box over which ``x``-dependent coefficients are sampled to compute
        ``c0`` and ``delta``; defaults to the unit cube.
    n_samples : int
        Number of sample points for ``x``-dependent coefficients.
    name : str, optional
        Label used in reports.

    Attributes
    ----------
    c0 : float
        Ellipticity constant with ``c0 |p| <= F(x, p) <= |p| / c0``.
    delta : float
        Modulus in ``F^2(y) - F^2(z) >= 2 F(z) grad F(z) . (y - z) + delta^2 |y - z|^2``.
    delta_polar : float
        Same modulus for the polar ``F°``.
    """

    def __init__(self, kind="euclidean", dim=2, weight=None, matrix=None,
                 sample_box=None, n_samples=2048, name=None):
        if kind not in KINDS:
            raise InvalidInputError(f"unknown anisotropy kind {kind!r}; expected one of {KINDS}")
        if int(dim) != dim or dim < 2:
            raise InvalidInputError(f"dimension must be an integer >= 2, got {dim}")
        self._kind = kind
        self._dim = int(dim)
        self._name = name or kind
        self._weight = None
        self._matrix = None
        self._inverse = None

        if kind == "weighted":
            if weight is None:
                raise InvalidInputError("weighted anisotropy needs a weight")
            if not callable(weight):
                weight = float(weight)
                if not np.isfinite(weight) or weight <= 0:
                    raise InvalidInputError("weight must be a positive finite number")
            self._weight = weight
        elif kind == "riemannian":
            if matrix is None:
                raise InvalidInputError("riemannian anisotropy needs a matrix")
            if not callable(matrix):
                A = check_finite_array(matrix, "matrix")
                if A.shape != (self._dim, self._dim):
                    raise InvalidInputError(f"matrix must have shape ({dim}, {dim})")
                if not np.allclose(A, A.T, rtol=0, atol=1e-12 * np.abs(A).max()):
                    raise InvalidInputError("matrix must be symmetric")
                A = 0.5 * (A + A.T)
                A.setflags(write=False)
                inv = np.linalg.inv(A)
                inv = 0.5 * (inv + inv.T)
                inv.setflags(write=False)
                self._matrix, self._inverse = A, inv
            else:
                self._matrix = matrix

        lo, hi = self._coefficient_bounds(sample_box, n_samples)
        # F in [sqrt(lo)|p|, sqrt(hi)|p|] (riemannian) or [lo|p|, hi|p|] (weighted)
        if kind == "riemannian":
            fmin, fmax = np.sqrt(lo), np.sqrt(hi)
        else:
            fmin, fmax = lo, hi
        self._c0 = float(min(fmin, 1.0 / fmax))
        self._delta = float(fmin)
        self._delta_polar = float(1.0 / fmax)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def euclidean(cls, dim=2):
        return cls("euclidean", dim)

    @classmethod
    def weighted(cls, weight, dim=2, **kwargs):
        return cls("weighted", dim, weight=weight, **kwargs)

    @classmethod
    def riemannian(cls, matrix, dim=None, **kwargs):
        if dim is None:
            if callable(matrix):
                raise InvalidInputError("dim is required for a matrix field")
            dim = np.shape(matrix)[0]
        return cls("riemannian", dim, matrix=matrix, **kwargs)

    def _coefficient_bounds(self, sample_box, n_samples):
        if self._kind == "euclidean":
            return 1.0, 1.0
        if self._kind == "weighted" and not callable(self._weight):
            return self._weight, self._weight
        if self._kind == "riemannian" and not callable(self._matrix):
            ev = np.linalg.eigvalsh(self._matrix)
            if ev[0] <= 0:
                raise InvalidInputError("matrix must be positive definite")
            return float(ev[0]), float(ev[-1])

        if sample_box is None:
            sample_box = (np.zeros(self._dim), np.ones(self._dim))
        lo_box, hi_box = (np.broadcast_to(np.asarray(b, float), (self._dim,)) for b in sample_box)
        rng = np.random.default_rng(0)
        xs = lo_box + (hi_box - lo_box) * rng.random((n_samples, self._dim))
        if self._kind == "weighted":
            a = check_finite_array(self._weight(xs), "weight(x)")
            if np.any(a <= 0):
                raise InvalidInputError("weight must be positive")
            return _BOUND_MARGIN * float(a.min()), float(a.max()) / _BOUND_MARGIN
        A = check_finite_array(self._matrix(xs), "matrix(x)")
        ev = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))
        if np.any(ev[:, 0] <= 0):
            raise InvalidInputError("matrix field must be positive definite")
        return _BOUND_MARGIN * float(ev[:, 0].min()), float(ev[:, -1].max()) / _BOUND_MARGIN

    # -- read-only attributes -------------------------------------------------

    kind = property(lambda self: self._kind)
    dim = property(lambda self: self._dim)
    name = property(lambda self: self._name)
    c0 = property(lambda self: self._c0)
    delta = property(lambda self: self._delta)
    delta_polar = property(lambda self: self._delta_polar)

    @property
    def depends_on_x(self):
        return callable(self._weight) or callable(self._matrix)

    def describe(self):
        """JSON-friendly summary used in reports."""
        out = {"kind": self._kind, "name": self._name, "dim": self._dim,
               "c0": self._c0, "delta": self._delta, "delta_polar": self._delta_polar}
        if self._kind == "weighted" and not callable(self._weight):
            out["weight"] = self._weight
        if self._kind == "riemannian" and not callable(self._matrix):
            out["matrix"] = self._matrix.tolist()
        return out

    def __repr__(self):
        return f"AnisotropyModel(kind={self._kind!r}, dim={self._dim}, name={self._name!r})"

    def local(self, x=None):
        """Freeze the model at points ``x`` of shape ``(..., d)``.

        ``x`` may be omitted for ``x``-independent models.
        """
        if x is None:
            if self.depends_on_x:
                raise InvalidInputError("this anisotropy depends on x; a point is required")
            return LocalAnisotropy(self._kind, self._dim, weight=self._weight,
                                   matrix=self._matrix, inverse=self._inverse)
        x = np.asarray(x, dtype=float)
        if self._kind == "weighted" and callable(self._weight):
            w = np.asarray(self._weight(x), dtype=float)
            return LocalAnisotropy(self._kind, self._dim, weight=w)
        if self._kind == "riemannian" and callable(self._matrix):
            A = np.asarray(self._matrix(x), dtype=float)
            A = 0.5 * (A + np.swapaxes(A, -1, -2))
            return LocalAnisotropy(self._kind, self._dim, matrix=A, inverse=np.linalg.inv(A))
        return LocalAnisotropy(self._kind, self._dim, weight=self._weight,
                               matrix=self._matrix, inverse=self._inverse)


# -- presets ------------------------------------------------------------------

def _rotating_matrix(dim, eigenvalues=(1.0, 4.0), turns=0.5):
    """``A(x) = R(theta) diag(l1, l2) R(theta)^T`` with ``theta = 2 pi turns x_1``."""
    l1, l2 = eigenvalues
    extra = 0.5 * (l1 + l2)

    def matrix(x):
        x = np.asarray(x, dtype=float)
        theta = 2 * np.pi * turns * x[..., 0]
        c, s = np.cos(theta), np.sin(theta)
        A = np.zeros(x.shape[:-1] + (dim, dim))
        A[..., 0, 0] = l1 * c * c + l2 * s * s
        A[..., 1, 1] = l1 * s * s + l2 * c * c
        A[..., 0, 1] = A[..., 1, 0] = (l1 - l2) * c * s
        for k in range(2, dim):
            A[..., k, k] = extra
        return A

    return matrix


def _bump_weight(dim, amplitude=0.5, width=0.2):
    center = np.full(dim, 0.5)

    def weight(x):
        r2 = np.sum((np.asarray(x, dtype=float) - center) ** 2, axis=-1)
        return 1.0 + amplitude * np.exp(-r2 / width**2)

    return weight


PRESETS = ("euclidean", "diagonal", "rotating", "bump")


def preset(name, dim=2):
    """Named anisotropies used by the CLI and the test-suite.

    ``diagonal``  constant ``A = diag(1, 4, 2.5, ...)``
    ``rotating``  ``A(x)`` with eigenvalues (1, 4) rotating along ``x_1``
    ``bump``      ``a(x) = 1 + 0.5 exp(-|x - c|^2 / 0.04)``, ``c`` the unit-cube centre
    """
    if name == "euclidean":
        return AnisotropyModel.euclidean(dim)
    if name == "diagonal":
        diag = [1.0, 4.0] + [2.5] * (dim - 2)
        return AnisotropyModel.riemannian(np.diag(diag), name="diagonal")
    if name == "rotating":
        return AnisotropyModel.riemannian(_rotating_matrix(dim), dim=dim, name="rotating")
    if name == "bump":
        return AnisotropyModel.weighted(_bump_weight(dim), dim=dim, name="bump")
    raise InvalidInputError(f"unknown anisotropy preset {name!r}; expected one of {PRESETS}")


# -- public operations --------------------------------------------------------

def _prepare(model, x, v, name):
    v = check_vectors(v, model.dim, name)
    if x is not None:
        x = check_vectors(x, model.dim, "x")
    return model.local(x), v


def f_eval(model, x, p):
    """Evaluate ``F(x, p)``; zero exactly when ``p = 0``."""
    loc, p = _prepare(model, x, p, "p")
    return loc.value(p)


def f_polar(model, x, z):
    """Evaluate the polar ``F°(x, z) = sup {z . p : F(x, p) <= 1}``."""
    loc, z = _prepare(model, x, z, "z")
    return loc.polar(z)


def f_grad(model, x, p):
    """Gradient ``grad_p F(x, p)``, zero-homogeneous in ``p``.

    Raises
    ------
    DegeneratePointError
        If any ``p`` is the zero vector.
    """
    loc, p = _prepare(model, x, p, "p")
    return loc.grad(p)


def polar_grad(model, x, z):
    """Gradient ``grad_z F°(x, z)``; inverse of :func:`f_grad` on the unit sphere."""
    loc, z = _prepare(model, x, z, "z")
    return loc.polar_grad(z)


def check_strong_convexity(model, x, y, z, polar=False):
    """Residual of the quadratic lower bound for ``F^2`` (or ``F°^2``).

    Returns ``F^2(y) - F^2(z) - 2 F(z) grad F(z) . (y - z) - delta^2 |y - z|^2``,
    which is non-negative up to rounding. At ``z = 0`` the subgradient is
    taken as zero. With ``polar=True`` the same expression is evaluated for
    ``F°`` with modulus ``model.delta_polar``.
    """
    loc, y = _prepare(model, x, y, "y")
    z = check_vectors(z, model.dim, "z")
    if polar:
        sq, dmap, delta = (lambda v: loc.polar(v) ** 2), loc.polar_duality_map, model.delta_polar
    else:
        sq, dmap, delta = (lambda v: loc.value(v) ** 2), loc.duality_map, model.delta
    diff = y - z
    linear = 2.0 * np.einsum("...i,...i->...", dmap(z), diff)
    return sq(y) - sq(z) - linear - delta**2 * np.einsum("...i,...i->...", diff, diff)


def dual_constraint_project(model, x, z):
    """Scale ``z`` back onto ``{F°(x, .) <= 1}``; identity on feasible vectors."""
    loc, z = _prepare(model, x, z, "z")
    return loc.project(z)
