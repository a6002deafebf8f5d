"""Closed convex sets in R^n with exact metric projections.

These double as fixed-point metadata: the fixed set of a projection is its
target set, the fixed set of a prox is the minimizer, and so on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


def _vec(x) -> np.ndarray:
    v = np.array(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a non-empty vector, got shape {v.shape}")
    v.setflags(write=False)
    return v


class ConvexSet:
    dim: int

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(self.project(x) - x)) <= tol

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x


@dataclass(frozen=True, eq=False)
class Point(ConvexSet):
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", _vec(self.point))

    @property
    def dim(self):
        return self.point.size

    def project(self, x):
        self._check(x)
        return np.array(self.point)

    def to_dict(self):
        return {"type": "point", "point": self.point.tolist()}


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """``{x : <a, x> <= b}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = _vec(self.normal)
        if not np.any(a):
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.size

    def project(self, x):
        x = self._check(x)
        excess = float(self.normal @ x) - self.offset
        if excess <= 0.0:
            return np.array(x)
        return x - (excess / float(self.normal @ self.normal)) * self.normal

    def to_dict(self):
        return {"type": "halfspace", "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _vec(self.lower), _vec(self.upper)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box needs lower <= upper of equal length")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size

    def project(self, x):
        return np.clip(self._check(x), self.lower, self.upper)

    def to_dict(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def project(self, x):
        d = self._check(x) - self.center
        r = float(np.linalg.norm(d))
        if r <= self.radius:
            return np.array(x, dtype=float)
        return self.center + (self.radius / r) * d

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class AffineSet(ConvexSet):
    """``{x : A x = b}``; must be nonempty."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.matrix, dtype=float))
        b = np.atleast_1d(np.array(self.rhs, dtype=float))
        if a.shape[0] != b.shape[0]:
            raise DimensionError("affine set: rows of A and length of b differ")
        pinv = np.linalg.pinv(a)
        if np.linalg.norm(a @ (pinv @ b) - b) > 1e-9 * max(1.0, float(np.linalg.norm(b))):
            raise ValueError("affine set is empty (A x = b inconsistent)")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "_pinv", pinv)

    @property
    def dim(self):
        return self.matrix.shape[1]

    def project(self, x):
        x = self._check(x)
        return x - self._pinv @ (self.matrix @ x - self.rhs)

    def to_dict(self):
        return {"type": "affine", "matrix": self.matrix.tolist(), "rhs": self.rhs.tolist()}


@dataclass(frozen=True, eq=False)
class EmptySet(ConvexSet):
    dim: int

    def project(self, x):
        raise ValueError("cannot project onto the empty set")

    def contains(self, x, tol=1e-9):
        return False

    def to_dict(self):
        return {"type": "empty", "dim": self.dim}


def solution_set(matrix, rhs, tol: float = 1e-10) -> ConvexSet:
    """``{x : M x = r}`` as a Point, AffineSet or EmptySet."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    r = np.atleast_1d(np.asarray(rhs, dtype=float))
    n = m.shape[1]
    u, s, vt = np.linalg.svd(m)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    sol = np.linalg.pinv(m, rcond=tol) @ r
    if np.linalg.norm(m @ sol - r) > 1e-9 * max(1.0, float(np.linalg.norm(r))):
        return EmptySet(n)
    if rank == n:
        return Point(sol)
    return AffineSet(m, r)


def set_from_dict(d: dict) -> ConvexSet:
    kind = d.get("type")
    if kind == "point":
        return Point(d["point"])
    if kind == "halfspace":
        return Halfspace(d["normal"], d["offset"])
    if kind == "box":
        return Box(d["lower"], d["upper"])
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    if kind == "affine":
        return AffineSet(d["matrix"], d["rhs"])
    if kind == "empty":
        return EmptySet(int(d["dim"]))
    raise ValueError(f"unknown set type {kind!r}")
