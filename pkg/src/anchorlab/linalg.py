"""Dense complex linear algebra on small Hilbert spaces.

Matrices are plain complex ``numpy`` arrays.  Projections, effects and states
are thin immutable wrappers that validate their algebraic invariants at
construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, DimensionError, InvariantError, NotHermitianError

DEFAULT_TOL = 1e-10
EIG_TIE_TOL = 1e-9
RANK_TOL = 1e-9
JACOBI_OFF_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-9
MAX_SWEEPS = 100


def as_matrix(a, dim: int | None = None) -> np.ndarray:
    """Return ``a`` as a square complex matrix, checking its shape."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {m.shape[0]}")
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")


def adjoint(a) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def commutator(x, y) -> np.ndarray:
    """``XY - YX``."""
    x = as_matrix(x)
    y = as_matrix(y)
    _same_dim(x, y)
    return x @ y - y @ x


def operator_norm(a) -> float:
    """Spectral norm (largest singular value)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    if a.ndim == 1:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a, 2))


# ---------------------------------------------------------------------------
# Hermitian eigensolver (cyclic Jacobi)


class Eigensystem(NamedTuple):
    """Eigenvalues sorted descending and matching eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int
    residual: float

    def pairs(self):
        return [(float(lam), self.vectors[:, i]) for i, lam in enumerate(self.values)]


def _off_norm(a: np.ndarray) -> float:
    # summed directly: ||A||^2 - ||diag A||^2 cancels down to ~1e-8 ||A|| after the sqrt
    off = a[~np.eye(a.shape[0], dtype=bool)]
    return float(np.linalg.norm(off))


def hermitian_eigendecomposition(a, tol: float = DEFAULT_TOL, max_sweeps: int = MAX_SWEEPS) -> Eigensystem:
    """Full eigensystem of a Hermitian matrix by cyclic complex Jacobi rotations.

    Each rotation first removes the phase of the pivot ``a[p, q]`` and then
    applies the real symmetric Jacobi rotation, so the accumulated transform
    stays unitary.  Sweeps stop once the off-diagonal Frobenius mass drops
    below ``JACOBI_OFF_TOL`` (scaled by ``max(1, ||A||_F)``).

    Raises
    ------
    NotHermitianError
        If ``||A - A*|| > tol * max(1, ||A||)``.
    ConvergenceError
        If the sweep limit is hit; ``residual`` carries the remaining
        off-diagonal mass.
    """
    a = as_matrix(a)
    scale = max(1.0, float(np.linalg.norm(a)))
    skew = operator_norm(a - adjoint(a))
    if skew > tol * scale:
        raise NotHermitianError(f"matrix is not Hermitian: ||A - A*|| = {skew:.3e}")
    a = 0.5 * (a + adjoint(a))
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    target = JACOBI_OFF_TOL * scale

    sweeps = 0
    polish = 1  # one extra sweep after the target is met; convergence is quadratic
    while True:
        if _off_norm(a) < target:
            if polish == 0:
                break
            polish -= 1
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps", residual=_off_norm(a)
            )
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                h = a[p, q]
                mag = abs(h)
                if mag <= 1e-300:
                    continue
                phase = h / mag
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                if abs(theta) > 1e100:
                    # theta^2 would overflow; t ~ 1/(2 theta) to full precision here
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = adjoint(g) @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ g

    values = np.diag(a).real.copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    return Eigensystem(values, vectors, sweeps, _off_norm(a))


def reconstruct(eig: Eigensystem) -> np.ndarray:
    return (eig.vectors * eig.values) @ adjoint(eig.vectors)


def range_basis(a, threshold: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the eigenvectors of Hermitian ``a`` with eigenvalue > threshold."""
    eig = hermitian_eigendecomposition(a)
    return eig.vectors[:, eig.values > threshold]


# ---------------------------------------------------------------------------
# Value types


@dataclass(frozen=True, eq=False)
class ProjectionOp:
    """Orthogonal projection ``E = E* = E^2`` on ``C^n``."""

    matrix: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        skew = operator_norm(m - adjoint(m))
        if skew > self.tol:
            raise InvariantError(f"not self-adjoint: ||E - E*|| = {skew:.3e}")
        idem = operator_norm(m @ m - m)
        if idem > self.tol:
            raise InvariantError(f"not idempotent: ||E^2 - E|| = {idem:.3e}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(float(np.trace(self.matrix).real)))

    def is_zero(self) -> bool:
        return operator_norm(self.matrix) <= self.tol

    def complement(self) -> "ProjectionOp":
        return ProjectionOp(np.eye(self.dim) - self.matrix, self.tol)

    def basis(self) -> np.ndarray:
        """Orthonormal basis of the range, as columns."""
        return range_basis(self.matrix, 0.5)

    def __repr__(self):
        return f"ProjectionOp(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class EffectOp:
    """Hermitian operator with ``0 <= A <= I``."""

    matrix: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        m = as_matrix(self.matrix)
        eig = hermitian_eigendecomposition(m, tol=max(self.tol, DEFAULT_TOL))
        lo, hi = float(eig.values[-1]), float(eig.values[0])
        if lo < -self.tol or hi > 1.0 + self.tol:
            raise InvariantError(f"spectrum [{lo:.6g}, {hi:.6g}] not inside [0, 1]")
        object.__setattr__(self, "matrix", _frozen(0.5 * (m + adjoint(m))))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"EffectOp(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit vector in ``C^n``."""

    entries: np.ndarray
    norm_tol: float = 1e-9

    def __post_init__(self):
        v = np.array(self.entries, dtype=complex)
        if v.ndim != 1 or v.size == 0:
            raise DimensionError(f"state must be a non-empty vector, got shape {v.shape}")
        nrm = float(np.linalg.norm(v))
        if abs(nrm - 1.0) > self.norm_tol:
            raise InvariantError(f"state is not unit norm (|psi| = {nrm:.12g})")
        object.__setattr__(self, "entries", _frozen(v))

    @classmethod
    def normalized(cls, v) -> "StateVector":
        v = np.asarray(v, dtype=complex)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise InvariantError("cannot normalize the zero vector")
        return cls(v / nrm)

    @classmethod
    def basis(cls, dim: int, i: int) -> "StateVector":
        e = np.zeros(dim, dtype=complex)
        e[i] = 1.0
        return cls(e)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


# ---------------------------------------------------------------------------
# Projection constructors


def zero_projection(dim: int) -> ProjectionOp:
    return ProjectionOp(np.zeros((dim, dim)))


def identity_projection(dim: int) -> ProjectionOp:
    return ProjectionOp(np.eye(dim))


def diag_projection(entries: Sequence[float]) -> ProjectionOp:
    return ProjectionOp(np.diag(np.asarray(entries, dtype=complex)))


def span_projection(vectors: Iterable, dim: int | None = None) -> ProjectionOp:
    """Projection onto the span of ``vectors`` (which need not be orthonormal)."""
    cols = [np.asarray(v, dtype=complex) for v in vectors]
    if not cols:
        if dim is None:
            raise DimensionError("dim is required for an empty span")
        return zero_projection(dim)
    m = np.column_stack(cols)
    if dim is not None and m.shape[0] != dim:
        raise DimensionError(f"vectors have dimension {m.shape[0]}, expected {dim}")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    q = u[:, s > RANK_TOL * max(1.0, s[0] if s.size else 1.0)]
    p = q @ adjoint(q)
    return ProjectionOp(0.5 * (p + adjoint(p)))


def rank_one_projection(v) -> ProjectionOp:
    return span_projection([v])


def _projection_from_basis(q: np.ndarray, dim: int, tol: float) -> ProjectionOp:
    if q.shape[1] == 0:
        return ProjectionOp(np.zeros((dim, dim)), tol)
    p = q @ adjoint(q)
    return ProjectionOp(0.5 * (p + adjoint(p)), tol)


# ---------------------------------------------------------------------------
# Spectral calculus and lattice operations


def _effect_matrix(a) -> np.ndarray:
    return a.matrix if isinstance(a, (EffectOp, ProjectionOp)) else as_matrix(a)


def threshold_tie_eigenvalues(a, tau: float, tie_tol: float = EIG_TIE_TOL) -> list[float]:
    """Eigenvalues of ``a`` within ``tie_tol`` of ``tau``; these are included by the threshold."""
    eig = hermitian_eigendecomposition(_effect_matrix(a))
    return [float(lam) for lam in eig.values if abs(lam - tau) <= tie_tol]


def spectral_threshold_projection(a, tau: float, tie_tol: float = EIG_TIE_TOL) -> ProjectionOp:
    """Spectral projection of ``a`` onto eigenvalues in ``[tau, 1]``.

    Eigenvalues within ``tie_tol`` below ``tau`` are included (the interval is
    closed at ``tau``).
    """
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    m = _effect_matrix(a)
    eig = hermitian_eigendecomposition(m)
    keep = eig.values >= tau - tie_tol
    return _projection_from_basis(eig.vectors[:, keep], m.shape[0], DEFAULT_TOL)


def subspace_meet(e: ProjectionOp, f: ProjectionOp) -> ProjectionOp:
    """Projection onto ``ran(E) ∩ ran(F)``.

    The intersection is the null space of the positive matrix ``2I - E - F``.
    """
    _same_dim(e.matrix, f.matrix)
    n = e.dim
    eig = hermitian_eigendecomposition(2.0 * np.eye(n) - e.matrix - f.matrix)
    return _projection_from_basis(eig.vectors[:, eig.values <= RANK_TOL], n, max(e.tol, f.tol))


def subspace_join(e: ProjectionOp, f: ProjectionOp) -> ProjectionOp:
    """Projection onto ``ran(E) + ran(F)`` (the range of ``E + F``)."""
    _same_dim(e.matrix, f.matrix)
    q = range_basis(e.matrix + f.matrix)
    return _projection_from_basis(q, e.dim, max(e.tol, f.tol))


def projection_leq(e: ProjectionOp, f: ProjectionOp, tol: float = DEFAULT_TOL) -> bool:
    """Lattice order ``E <= F`` (``ran E ⊆ ran F``), tested as ``||FE - E|| <= tol``."""
    _same_dim(e.matrix, f.matrix)
    return operator_norm(f.matrix @ e.matrix - e.matrix) <= tol


def projections_close(e, f, tol: float = DEFAULT_TOL) -> bool:
    em = e.matrix if isinstance(e, ProjectionOp) else np.asarray(e)
    fm = f.matrix if isinstance(f, ProjectionOp) else np.asarray(f)
    return float(np.max(np.abs(em - fm))) <= tol


# ---------------------------------------------------------------------------
# JSON wire format: row-major arrays of [re, im] pairs


def matrix_to_json(a) -> list:
    m = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _scalar_from_json(z) -> complex:
    if isinstance(z, (int, float)) and not isinstance(z, bool):
        return complex(z)
    if isinstance(z, (list, tuple)) and len(z) == 2 and all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in z
    ):
        return complex(z[0], z[1])
    raise ValueError(f"matrix entry must be a number or an [re, im] pair, got {z!r}")


def matrix_from_json(rows) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValueError("matrix must be a non-empty list of rows")
    m = np.array([[_scalar_from_json(z) for z in row] for row in rows], dtype=complex)
    return as_matrix(m)


def vector_to_json(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def vector_from_json(entries) -> np.ndarray:
    if not isinstance(entries, list) or not entries:
        raise ValueError("vector must be a non-empty list")
    return np.array([_scalar_from_json(z) for z in entries], dtype=complex)
