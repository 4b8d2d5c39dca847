"""Closed convex sets with exact projection, tangent-cone projection and the
KKT residual.

Three primitive sets are provided (:class:`Box`, :class:`Ball`,
:class:`WholeSpace`) plus :class:`ProductSet`, an ordered pair of sets acting
blockwise on a stacked vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

TOL_MEMBERSHIP = 1e-9


class GeometryError(ValueError):
    """Base class for structured geometry errors."""


class DimensionError(GeometryError):
    def __init__(self, expected, got):
        super().__init__(f"dimension mismatch: set has dim {expected}, got {got}")
        self.expected = expected
        self.got = got


class NotInSetError(GeometryError):
    def __init__(self, distance, tol):
        super().__init__(
            f"point is outside the set by {distance:.3e} (tolerance {tol:.1e})")
        self.distance = distance
        self.tol = tol


def as_point(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise GeometryError(f"a point must be a 1-D vector, got shape {arr.shape}")
    return arr


class ConvexSet:
    """Interface shared by all sets. ``dim`` is ``None`` for an unsized
    :class:`WholeSpace`, which adapts to any input dimension."""

    dim: int | None

    def _check(self, x) -> np.ndarray:
        x = as_point(x)
        if self.dim is not None and x.shape[0] != self.dim:
            raise DimensionError(self.dim, x.shape[0])
        return x

    def _check_member(self, x, tol=TOL_MEMBERSHIP) -> np.ndarray:
        x = self._check(x)
        d = self.distance(x)
        if d > tol:
            raise NotInSetError(d, tol)
        return x

    def distance(self, x) -> float:
        x = self._check(x)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol: float = TOL_MEMBERSHIP) -> bool:
        return self.distance(x) <= tol

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def project_tangent(self, x, v) -> np.ndarray:
        raise NotImplementedError

    def normal_cone_contains(self, x, v, tol: float = 0.0) -> bool:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def fast_ops(self):
        """``(project, tangent)`` callables without input validation, for
        inner loops whose iterates are already known to be feasible."""
        return self.project, self.project_tangent


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower).copy()
        hi = as_point(self.upper).copy()
        if lo.shape != hi.shape:
            raise DimensionError(lo.shape[0], hi.shape[0])
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise GeometryError("box bounds must be finite")
        if not np.all(lo < hi):
            raise GeometryError("box requires lower < upper componentwise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def project(self, x):
        return kernels.project_box(self._check(x), self.lower, self.upper)

    def project_tangent(self, x, v):
        x = self._check_member(x)
        v = self._check(v)
        # Boundary coordinates are detected by exact equality: projection
        # writes the bound value itself.
        return kernels.tangent_box(x, self.lower, self.upper, v)

    def normal_cone_contains(self, x, v, tol=0.0):
        x = self._check_member(x)
        v = self._check(v)
        at_lo = x == self.lower
        at_hi = x == self.upper
        interior = ~(at_lo | at_hi)
        return bool(np.all(v[at_hi] >= -tol) and np.all(v[at_lo] <= tol)
                    and np.all(np.abs(v[interior]) <= tol))

    def to_config(self):
        return {"type": "box", "lower": self.lower.tolist(),
                "upper": self.upper.tolist()}

    def fast_ops(self):
        lo, hi = self.lower, self.upper
        return (lambda x: kernels.project_box(x, lo, hi),
                lambda x, v: kernels.tangent_box(x, lo, hi, v))


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float
    boundary_tol: float = field(default=TOL_MEMBERSHIP)

    def __post_init__(self):
        c = as_point(self.center).copy()
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise GeometryError("ball radius must be positive and finite")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def project(self, x):
        x = self._check(x)
        d = x - self.center
        n = np.linalg.norm(d)
        if n <= self.radius:
            return x.copy()
        return self.center + (self.radius / n) * d

    def distance(self, x):
        x = self._check(x)
        return max(0.0, float(np.linalg.norm(x - self.center)) - self.radius)

    def _on_boundary(self, x):
        d = x - self.center
        n = np.linalg.norm(d)
        return n >= self.radius - self.boundary_tol, d, n

    def project_tangent(self, x, v):
        x = self._check_member(x)
        v = self._check(v).copy()
        on_bd, d, n = self._on_boundary(x)
        if not on_bd:
            return v
        u = d / n
        radial = float(v @ u)
        if radial > 0:
            v -= radial * u
        return v

    def normal_cone_contains(self, x, v, tol=0.0):
        x = self._check_member(x)
        v = self._check(v)
        on_bd, d, n = self._on_boundary(x)
        if not on_bd:
            return bool(np.linalg.norm(v) <= tol)
        u = d / n
        radial = float(v @ u)
        return bool(radial >= -tol and np.linalg.norm(v - radial * u) <= tol)

    def to_config(self):
        return {"type": "ball", "center": self.center.tolist(),
                "radius": self.radius}


@dataclass(frozen=True, eq=False)
class WholeSpace(ConvexSet):
    dim: int | None = None

    def project(self, x):
        return self._check(x).copy()

    def distance(self, x):
        self._check(x)
        return 0.0

    def project_tangent(self, x, v):
        self._check(x)
        return self._check(v).copy()

    def normal_cone_contains(self, x, v, tol=0.0):
        self._check(x)
        return bool(np.all(np.abs(self._check(v)) <= tol))

    def fast_ops(self):
        return (lambda x: x.copy()), (lambda x, v: v.copy())

    def to_config(self):
        cfg = {"type": "whole_space"}
        if self.dim is not None:
            cfg["dim"] = self.dim
        return cfg


@dataclass(frozen=True, eq=False)
class ProductSet(ConvexSet):
    """Cartesian product ``first x second`` acting on ``concat(a, b)``."""

    first: ConvexSet
    second: ConvexSet

    def __post_init__(self):
        if self.first.dim is None or self.second.dim is None:
            raise GeometryError("product factors need explicit dimensions")

    @property
    def dim(self) -> int:
        return self.first.dim + self.second.dim

    def split(self, x):
        x = self._check(x)
        return x[: self.first.dim], x[self.first.dim:]

    def project(self, x):
        a, b = self.split(x)
        return np.concatenate([self.first.project(a), self.second.project(b)])

    def distance(self, x):
        a, b = self.split(x)
        return float(np.hypot(self.first.distance(a), self.second.distance(b)))

    def project_tangent(self, x, v):
        a, b = self.split(x)
        va, vb = self.split(v)
        return np.concatenate([self.first.project_tangent(a, va),
                               self.second.project_tangent(b, vb)])

    def normal_cone_contains(self, x, v, tol=0.0):
        a, b = self.split(x)
        va, vb = self.split(v)
        return (self.first.normal_cone_contains(a, va, tol)
                and self.second.normal_cone_contains(b, vb, tol))

    def fast_ops(self):
        m = self.first.dim
        p1, t1 = self.first.fast_ops()
        p2, t2 = self.second.fast_ops()
        return (lambda x: np.concatenate([p1(x[:m]), p2(x[m:])]),
                lambda x, v: np.concatenate([t1(x[:m], v[:m]),
                                             t2(x[m:], v[m:])]))

    def to_config(self):
        return {"type": "product", "sets": [self.first.to_config(),
                                            self.second.to_config()]}


def project(s: ConvexSet, x) -> np.ndarray:
    return s.project(x)


def project_tangent_cone(s: ConvexSet, x, v) -> np.ndarray:
    return s.project_tangent(x, v)


def kkt_residual(s: ConvexSet, grad, x) -> float:
    """Norm of the tangent-cone projection of ``-grad`` at ``x``; zero exactly
    at KKT points."""
    return float(np.linalg.norm(s.project_tangent(x, -as_point(grad))))


def normal_cone_contains(s: ConvexSet, x, v, tol: float = 0.0) -> bool:
    return s.normal_cone_contains(x, v, tol)


def set_from_config(cfg: dict, dim: int | None = None) -> ConvexSet:
    kind = cfg["type"]
    if kind == "box":
        lower, upper = cfg["lower"], cfg["upper"]
        if np.isscalar(lower) or np.isscalar(upper):
            if dim is None:
                raise GeometryError("scalar box bounds need a dimension")
            return Box.cube(lower, upper, dim)
        return Box(lower, upper)
    if kind == "ball":
        return Ball(cfg["center"], cfg["radius"])
    if kind == "whole_space":
        return WholeSpace(cfg.get("dim", dim))
    if kind == "product":
        a, b = cfg["sets"]
        return ProductSet(set_from_config(a), set_from_config(b))
    raise GeometryError(f"unknown set type {kind!r}")
