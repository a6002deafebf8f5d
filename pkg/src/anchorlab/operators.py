"""Nonexpansive maps on R^n described symbolically.

Every operator carries a certified Lipschitz upper bound and, when it is
known, its fixed-point set as a :class:`~anchorlab.convex.ConvexSet`.
Operators are immutable; ``apply`` is pure.

Descriptor grammar (version 1), used by the CLI config files::

    {"kind": "rotation", "theta": 1.5707963267948966}
    {"kind": "scaling", "alpha": 0.8, "dim": 2}
    {"kind": "affine", "linear": [[1, 0], [0, 0.5]], "offset": [0, 0]}
    {"kind": "projection", "set": {"type": "halfspace", "normal": [1, 0], "offset": 1}}
    {"kind": "prox", "gamma": 0.5, "center": [0, 0]}
    {"kind": "resolvent", "monotone": [[2, 0], [0, 1]], "gamma": 1.0, "offset": [0, 0]}
    {"kind": "averaged", "alpha": 0.5, "inner": {...}}
    {"kind": "composition", "factors": [{...}, {...}]}   # applied right to left
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .convex import ConvexSet, EmptySet, Point, set_from_dict, solution_set
from .errors import DimensionError, FixedPointError, MetadataError, PreconditionError
from .linalg import hermitian_eigendecomposition, operator_norm

DESCRIPTOR_VERSION = 1
DEFAULT_SEED = 42
SAMPLE_RADIUS = 10.0
FIXED_TOL = 1e-9
AP_RESIDUAL = 1e-12
AP_MAX_ITER = 10**6


class OperatorMap:
    """Base class.  Subclasses set ``kind`` and ``dim`` and implement ``apply``."""

    kind: str = "abstract"
    dim: int

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)

    @property
    def lipschitz_upper(self) -> float:
        raise NotImplementedError

    @property
    def fixed_set(self) -> ConvexSet | None:
        """Known fixed-point set, or ``None`` when unknown."""
        return None

    def affine_parts(self):
        """``(L, b)`` with ``T x = L x + b``, or ``None`` for non-affine maps."""
        return None

    def to_dict(self) -> dict:
        raise MetadataError(f"operator kind {self.kind!r} has no descriptor")

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"{self.kind}: expected a vector of length {self.dim}, got shape {x.shape}")
        return x

    def __repr__(self):
        return f"<{type(self).__name__} kind={self.kind} dim={self.dim}>"


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _quarter_turn(theta: float):
    q = theta / (math.pi / 2)
    k = round(q)
    if abs(q - k) < 1e-12:
        return int(k) % 4
    return None


def rotation_matrix(theta: float) -> np.ndarray:
    """2x2 rotation by ``theta``; exact entries for multiples of a quarter turn."""
    k = _quarter_turn(theta)
    if k is not None:
        c, s = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[k]
    else:
        c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


class AffineMap(OperatorMap):
    """``x -> L x + b``; also used for rotations and scalings."""

    def __init__(self, linear, offset=None, kind: str = "affine", lipschitz: float | None = None, **params):
        lin = np.atleast_2d(np.array(linear, dtype=float))
        if lin.shape[0] != lin.shape[1]:
            raise DimensionError(f"linear part must be square, got {lin.shape}")
        self.dim = lin.shape[0]
        off = np.zeros(self.dim) if offset is None else np.array(offset, dtype=float)
        if off.shape != (self.dim,):
            raise DimensionError("offset length does not match the linear part")
        self.linear = _frozen(lin)
        self.offset = _frozen(off)
        self.kind = kind
        self.params = params
        self._lip = operator_norm(lin) if lipschitz is None else float(lipschitz)

    def apply(self, x):
        return self.linear @ self._check(x) + self.offset

    @property
    def lipschitz_upper(self):
        return self._lip

    @property
    def fixed_set(self):
        return solution_set(np.eye(self.dim) - self.linear, self.offset)

    def affine_parts(self):
        return self.linear, self.offset

    def to_dict(self):
        if self.kind == "rotation":
            return {"kind": "rotation", "theta": self.params["theta"]}
        if self.kind == "scaling":
            return {"kind": "scaling", "alpha": self.params["alpha"], "dim": self.dim}
        return {"kind": "affine", "linear": self.linear.tolist(), "offset": self.offset.tolist()}


def rotation(theta: float) -> AffineMap:
    return AffineMap(rotation_matrix(theta), kind="rotation", lipschitz=1.0, theta=float(theta))


def scaling(alpha: float, dim: int = 2) -> AffineMap:
    return AffineMap(alpha * np.eye(dim), kind="scaling", lipschitz=abs(alpha), alpha=float(alpha))


def affine(linear, offset=None) -> AffineMap:
    return AffineMap(linear, offset)


class Projection(OperatorMap):
    """Metric projection onto a closed convex set."""

    kind = "projection"

    def __init__(self, target: ConvexSet):
        if isinstance(target, EmptySet):
            raise ValueError("cannot project onto the empty set")
        self.target = target
        self.dim = target.dim

    def apply(self, x):
        return self.target.project(self._check(x))

    @property
    def lipschitz_upper(self):
        return 1.0

    @property
    def fixed_set(self):
        return self.target

    def to_dict(self):
        return {"kind": "projection", "set": self.target.to_dict()}


class ProxL1(OperatorMap):
    """Prox of ``gamma * ||x - c||_1``: soft thresholding around ``c``."""

    kind = "prox"

    def __init__(self, gamma: float, center):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.gamma = float(gamma)
        self.center = _frozen(center)
        self.dim = self.center.size

    def apply(self, x):
        d = self._check(x) - self.center
        return self.center + np.sign(d) * np.maximum(np.abs(d) - self.gamma, 0.0)

    @property
    def lipschitz_upper(self):
        return 1.0

    @property
    def fixed_set(self):
        return Point(self.center)

    def to_dict(self):
        return {"kind": "prox", "gamma": self.gamma, "center": self.center.tolist()}


def prox_l1(gamma: float, dim: int = 2, center=None) -> ProxL1:
    return ProxL1(gamma, np.zeros(dim) if center is None else center)


class Resolvent(OperatorMap):
    """``J = (I + gamma A)^{-1}`` of the affine monotone operator ``x -> A x - b``.

    ``A`` must be monotone (symmetric part positive semidefinite).  Fixed
    points of ``J`` are the zeros of ``A x - b``.
    """

    kind = "resolvent"

    def __init__(self, monotone, gamma: float = 1.0, offset=None):
        a = np.atleast_2d(np.array(monotone, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise DimensionError("monotone operator must be square")
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        sym = 0.5 * (a + a.T)
        lo = float(hermitian_eigendecomposition(sym).values[-1])
        if lo < -1e-10:
            raise PreconditionError(f"operator is not monotone (min eigenvalue of symmetric part {lo:.3e})")
        self.dim = a.shape[0]
        self.monotone = _frozen(a)
        self.gamma = float(gamma)
        self.offset = _frozen(np.zeros(self.dim) if offset is None else offset)
        self._inv = np.linalg.inv(np.eye(self.dim) + self.gamma * a)

    def apply(self, x):
        return self._inv @ (self._check(x) + self.gamma * self.offset)

    @property
    def lipschitz_upper(self):
        return 1.0

    @property
    def fixed_set(self):
        return solution_set(self.monotone, self.offset)

    def affine_parts(self):
        return self._inv, self._inv @ (self.gamma * self.offset)

    def to_dict(self):
        return {
            "kind": "resolvent",
            "monotone": self.monotone.tolist(),
            "gamma": self.gamma,
            "offset": self.offset.tolist(),
        }


class Averaged(OperatorMap):
    """``(1 - alpha) I + alpha S``."""

    kind = "averaged"

    def __init__(self, inner: OperatorMap, alpha: float):
        if not (0.0 < alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        self.inner = inner
        self.alpha = float(alpha)
        self.dim = inner.dim

    def apply(self, x):
        x = self._check(x)
        return (1.0 - self.alpha) * x + self.alpha * self.inner.apply(x)

    @property
    def lipschitz_upper(self):
        return (1.0 - self.alpha) + self.alpha * self.inner.lipschitz_upper

    @property
    def fixed_set(self):
        return self.inner.fixed_set

    def affine_parts(self):
        parts = self.inner.affine_parts()
        if parts is None:
            return None
        lin, off = parts
        return (1.0 - self.alpha) * np.eye(self.dim) + self.alpha * lin, self.alpha * off

    def to_dict(self):
        return {"kind": "averaged", "alpha": self.alpha, "inner": self.inner.to_dict()}


class Composition(OperatorMap):
    """``factors[0] ∘ factors[1] ∘ ... ∘ factors[-1]`` (rightmost applied first)."""

    kind = "composition"

    def __init__(self, factors: Sequence[OperatorMap]):
        factors = tuple(factors)
        if not factors:
            raise ValueError("composition needs at least one factor")
        if len({f.dim for f in factors}) != 1:
            raise DimensionError("composition factors have different dimensions")
        self.factors = factors
        self.dim = factors[0].dim

    def apply(self, x):
        x = self._check(x)
        for f in reversed(self.factors):
            x = f.apply(x)
        return x

    @property
    def lipschitz_upper(self):
        return math.prod(f.lipschitz_upper for f in self.factors)

    @property
    def fixed_set(self):
        parts = self.affine_parts()
        if parts is None:
            return None
        lin, off = parts
        return solution_set(np.eye(self.dim) - lin, off)

    def affine_parts(self):
        lin = np.eye(self.dim)
        off = np.zeros(self.dim)
        for f in reversed(self.factors):
            parts = f.affine_parts()
            if parts is None:
                return None
            fl, fb = parts
            lin, off = fl @ lin, fl @ off + fb
        return lin, off

    def to_dict(self):
        return {"kind": "composition", "factors": [f.to_dict() for f in self.factors]}


def compose(*factors: OperatorMap) -> Composition:
    return Composition(factors)


def power(t: OperatorMap, p: int) -> Composition:
    if p < 1:
        raise ValueError("power must be >= 1")
    return Composition([t] * p)


class BlackBox(OperatorMap):
    """Opaque callable.  Its Lipschitz bound is infinite unless the caller asserts one."""

    kind = "black-box"

    def __init__(self, fn: Callable, dim: int, asserted_lipschitz: float | None = None, fixed_set=None, note: str = ""):
        self.fn = fn
        self.dim = int(dim)
        self.asserted_lipschitz = asserted_lipschitz
        self._fixed = fixed_set
        self.provenance = note or ("asserted bound" if asserted_lipschitz is not None else "no bound")

    def apply(self, x):
        return np.asarray(self.fn(self._check(x)), dtype=float)

    @property
    def lipschitz_upper(self):
        return math.inf if self.asserted_lipschitz is None else float(self.asserted_lipschitz)

    @property
    def fixed_set(self):
        return self._fixed


def operator_from_dict(d: dict) -> OperatorMap:
    """Build an operator from a version-1 descriptor."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError(f"operator descriptor must be an object with a 'kind', got {d!r}")
    kind = d["kind"]
    if kind == "rotation":
        return rotation(float(d["theta"]))
    if kind == "scaling":
        return scaling(float(d["alpha"]), int(d.get("dim", 2)))
    if kind == "affine":
        return affine(d["linear"], d.get("offset"))
    if kind == "projection":
        return Projection(set_from_dict(d["set"]))
    if kind == "prox":
        return ProxL1(float(d["gamma"]), d["center"])
    if kind == "resolvent":
        return Resolvent(d["monotone"], float(d.get("gamma", 1.0)), d.get("offset"))
    if kind == "averaged":
        return Averaged(operator_from_dict(d["inner"]), float(d["alpha"]))
    if kind == "composition":
        return Composition([operator_from_dict(f) for f in d["factors"]])
    raise ValueError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# Lipschitz certificates and estimates


def lipschitz_certified(t: OperatorMap) -> float:
    """Certified upper bound on Lip(T).

    Exact spectral norm for affine kinds, 1 for projections/prox/resolvents,
    and the product of factor certificates for compositions.
    """
    return t.lipschitz_upper


def _ball_samples(rng, n: int, dim: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    return g * r[:, None]


def lipschitz_sampled_lower(t: OperatorMap, trials: int = 1000, seed: int = DEFAULT_SEED,
                            radius: float = SAMPLE_RADIUS, center=None) -> float:
    """Monte Carlo lower estimate of Lip(T) from ``trials`` random pairs in a ball."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    c = np.zeros(t.dim) if center is None else np.asarray(center, dtype=float)
    xs = c + _ball_samples(rng, trials, t.dim, radius)
    ys = c + _ball_samples(rng, trials, t.dim, radius)
    best = 0.0
    for x, y in zip(xs, ys):
        d = _euclid(x - y)
        if d == 0.0:
            continue
        best = max(best, _euclid(t.apply(x) - t.apply(y)) / d)
    return best


def _euclid(v: np.ndarray) -> float:
    # same formula for numerator and denominator: a coordinate permutation keeps the ratio at exactly 1
    return math.sqrt(math.fsum(v * v))


# ---------------------------------------------------------------------------
# Common fixed points


@dataclass(frozen=True)
class CommonFixedPoint:
    point: np.ndarray | None
    diagnostic: str
    iterations: int = 0
    residuals: tuple = field(default=())

    @property
    def found(self) -> bool:
        return self.point is not None


def fixed_residual(t: OperatorMap, z) -> float:
    return float(np.linalg.norm(t.apply(z) - np.asarray(z, dtype=float)))


def common_fixed_point(family: Sequence[OperatorMap], start=None, tol: float = FIXED_TOL,
                       residual: float = AP_RESIDUAL, max_iter: int = AP_MAX_ITER) -> CommonFixedPoint:
    """A point of ``∩ Fix(T_t)`` derived from each member's fixed-set metadata.

    Cyclic projections onto the declared fixed sets (exact in one pass when
    one of them is a single point).  The candidate is verified against the
    operators themselves before it is returned.

    Raises ``MetadataError`` if a member has no fixed-set metadata and
    ``FixedPointError`` if the candidate fails verification.
    """
    family = list(family)
    if not family:
        raise ValueError("empty family")
    sets = []
    for i, t in enumerate(family):
        s = t.fixed_set
        if s is None:
            raise MetadataError(f"member {i} ({t.kind}) has no known fixed points")
        if isinstance(s, EmptySet):
            return CommonFixedPoint(None, f"member {i} ({t.kind}) has no fixed points")
        sets.append(s)
    dim = family[0].dim
    x = np.zeros(dim) if start is None else np.asarray(start, dtype=float)
    it = 0
    points = [s for s in sets if isinstance(s, Point)]
    if points:
        # a declared single fixed point decides the candidate outright
        x = np.array(points[0].point)
        outside = [i for i, s in enumerate(sets) if not s.contains(x, tol)]
        if outside:
            return CommonFixedPoint(None, f"declared fixed point of one member lies outside members {outside}")
    else:
        while True:
            gap = max(float(np.linalg.norm(s.project(x) - x)) for s in sets)
            if gap < residual:
                break
            if it >= max_iter:
                return CommonFixedPoint(
                    None, f"no common point found: residual {gap:.3e} after {it} sweeps", it
                )
            for s in sets:
                x = s.project(x)
            it += 1
    res = tuple(fixed_residual(t, x) for t in family)
    bad = [i for i, r in enumerate(res) if r > tol]
    if bad:
        raise FixedPointError(
            f"candidate fails verification for members {bad} (residuals {[res[i] for i in bad]})"
        )
    return CommonFixedPoint(x, "verified", it, res)
