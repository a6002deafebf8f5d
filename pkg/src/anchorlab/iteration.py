"""Event-indexed iteration: schedules, orbits, block certificates and envelopes.

Three things are kept apart on purpose:

* a schedule's factors are *claims*,
* :func:`block_certify` turns operator descriptors into *certificates*,
* :func:`envelope_check` tests an observed *orbit* against an envelope.

An orbit is ``x_n = T_n ∘ ... ∘ T_1 (x_0)``.  Events ``n_1 < n_2 < ...`` close
blocks ``(n_{k-1}, n_k]`` with ``n_0 = 0``.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .convex import EmptySet, Point
from .errors import (
    CertificationError,
    DimensionError,
    FixedPointError,
    PreconditionError,
)
from .linalg import ProjectionOp, operator_norm
from .operators import (
    Composition,
    OperatorMap,
    fixed_residual,
    rotation,
    scaling,
)

TOL = 1e-9
EQ_TOL = 1e-12
MAX_STEPS = 10**6
DENORMAL_FLOOR = 1e-300

OperatorSource = Union[Sequence[OperatorMap], Callable[[int], OperatorMap]]


def operator_at(source: OperatorSource, t: int) -> OperatorMap:
    """Operator applied at step ``t >= 1``; sequences are repeated cyclically."""
    if callable(source) and not isinstance(source, OperatorMap):
        return source(t)
    if isinstance(source, OperatorMap):
        return source
    return source[(t - 1) % len(source)]


# ---------------------------------------------------------------------------
# Schedules and envelopes


@dataclass(frozen=True)
class EventSchedule:
    """Event indices with per-block contraction claims.

    ``periodic``: events at ``n1, n1 + M, n1 + 2M, ...`` each claiming ``lam``.
    ``heterogeneous``: blocks ``(lam_k, N_k)`` with ``n_k = N_1 + ... + N_k``;
    ``cyclic=True`` repeats the block list forever.
    ``explicit``: given indices, optional factors (``None`` = no claim).
    """

    variant: str
    lam: float | None = None
    M: int | None = None
    n1: int | None = None
    blocks: tuple = ()
    cyclic: bool = False
    indices: tuple = ()
    factors: tuple | None = None
    gap_bound: int | None = None

    def __post_init__(self):
        if self.variant == "periodic":
            if not (0.0 < self.lam < 1.0):
                raise ValueError("periodic factor must lie in (0, 1)")
            if self.M < 1 or self.n1 < 1:
                raise ValueError("gap M and first event n1 must be >= 1")
        elif self.variant == "heterogeneous":
            if not self.blocks:
                raise ValueError("heterogeneous schedule needs at least one block")
            for lam, n in self.blocks:
                if not (0.0 < lam < 1.0):
                    raise ValueError(f"block factor {lam} not in (0, 1)")
                if int(n) != n or n < 1:
                    raise ValueError(f"block length {n} must be a positive integer")
            if self.gap_bound is not None and max(n for _, n in self.blocks) > self.gap_bound:
                raise ValueError("a block is longer than the declared gap bound")
        elif self.variant == "explicit":
            idx = list(self.indices)
            if not idx or idx[0] < 1 or any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError("explicit events must be strictly increasing indices >= 1")
            if self.factors is not None:
                if len(self.factors) != len(idx):
                    raise ValueError("one factor per event is required")
                if any(not (0.0 < f < 1.0) for f in self.factors):
                    raise ValueError("factors must lie in (0, 1)")
        else:
            raise ValueError(f"unknown schedule variant {self.variant!r}")

    @classmethod
    def periodic(cls, lam: float, M: int, n1: int | None = None) -> "EventSchedule":
        return cls("periodic", lam=float(lam), M=int(M), n1=int(M if n1 is None else n1), gap_bound=int(M))

    @classmethod
    def heterogeneous(cls, blocks, cyclic: bool = False, gap_bound: int | None = None) -> "EventSchedule":
        blocks = tuple((float(lam), int(n)) for lam, n in blocks)
        return cls("heterogeneous", blocks=blocks, cyclic=cyclic, gap_bound=gap_bound)

    @classmethod
    def explicit(cls, indices, factors=None) -> "EventSchedule":
        return cls(
            "explicit",
            indices=tuple(int(i) for i in indices),
            factors=None if factors is None else tuple(float(f) for f in factors),
        )

    def iter_events(self):
        """Yield ``(n_k, claimed_factor_or_None)`` in order (possibly forever)."""
        if self.variant == "periodic":
            for k in itertools.count():
                yield self.n1 + k * self.M, self.lam
        elif self.variant == "heterogeneous":
            n = 0
            blocks = itertools.cycle(self.blocks) if self.cyclic else iter(self.blocks)
            for lam, length in blocks:
                n += length
                yield n, lam
        else:
            facs = self.factors if self.factors is not None else [None] * len(self.indices)
            yield from zip(self.indices, facs)

    def events(self, n_max: int) -> list[tuple[int, float | None]]:
        out = []
        for n, lam in self.iter_events():
            if n > n_max:
                break
            out.append((n, lam))
        return out

    def prefix_blocks(self, K: int) -> list[tuple[float, int]]:
        """First ``K`` blocks as ``(lam_k, N_k)``."""
        out = []
        prev = 0
        for n, lam in itertools.islice(self.iter_events(), K):
            out.append((lam, n - prev))
            prev = n
        return out

    @property
    def first_event(self) -> int:
        return next(self.iter_events())[0]

    def to_dict(self) -> dict:
        if self.variant == "periodic":
            return {"variant": "periodic", "lambda": self.lam, "M": self.M, "n1": self.n1}
        if self.variant == "heterogeneous":
            d = {"variant": "heterogeneous", "blocks": [list(b) for b in self.blocks], "cyclic": self.cyclic}
            if self.gap_bound is not None:
                d["gap_bound"] = self.gap_bound
            return d
        return {"variant": "explicit", "indices": list(self.indices),
                "factors": None if self.factors is None else list(self.factors)}


@dataclass(frozen=True)
class EnvelopeSpec:
    """Certified decay envelope ``E(n)``.

    ``periodic-floor``: ``lam ** (1 + (n - n1) // M)``.
    ``heterogeneous-product``: product of the factors of all events ``<= n``.

    The bound checked is ``dist(n) <= E(n) * dist(reference_index)``; the
    default reference is the starting point ``n = 0``.
    """

    variant: str
    lam: float | None = None
    M: int | None = None
    n1: int | None = None
    schedule: EventSchedule | None = None
    reference_index: int = 0

    def __post_init__(self):
        if self.variant == "periodic-floor":
            if not (0.0 < self.lam < 1.0) or self.M < 1 or self.n1 < 1:
                raise ValueError("periodic envelope needs lam in (0,1), M >= 1, n1 >= 1")
        elif self.variant == "heterogeneous-product":
            if self.schedule is None or self.schedule.variant == "periodic":
                raise ValueError("product envelope needs a heterogeneous or explicit schedule")
            if self.schedule.variant == "explicit" and self.schedule.factors is None:
                raise ValueError("product envelope needs per-event factors")
        else:
            raise ValueError(f"unknown envelope variant {self.variant!r}")

    @classmethod
    def periodic(cls, lam: float, M: int, n1: int, reference_index: int = 0) -> "EnvelopeSpec":
        return cls("periodic-floor", lam=float(lam), M=int(M), n1=int(n1), reference_index=reference_index)

    @classmethod
    def from_schedule(cls, schedule: EventSchedule, reference_index: int = 0) -> "EnvelopeSpec":
        if schedule.variant == "periodic":
            return cls.periodic(schedule.lam, schedule.M, schedule.n1, reference_index)
        return cls("heterogeneous-product", schedule=schedule, reference_index=reference_index)

    @property
    def first_event(self) -> int:
        return self.n1 if self.variant == "periodic-floor" else self.schedule.first_event

    def is_event(self, n: int) -> bool:
        if self.variant == "periodic-floor":
            return n >= self.n1 and (n - self.n1) % self.M == 0
        return any(e == n for e, _ in self.schedule.events(n))

    def to_dict(self) -> dict:
        if self.variant == "periodic-floor":
            d = {"variant": "periodic-floor", "lambda": self.lam, "M": self.M, "n1": self.n1}
        else:
            d = {"variant": "heterogeneous-product", "schedule": self.schedule.to_dict()}
        d["reference_index"] = self.reference_index
        return d


def envelope_value(spec: EnvelopeSpec, n: int) -> float:
    """``E(n)``; raises ``ValueError`` below the first event."""
    n = int(n)
    if n < spec.first_event:
        raise ValueError(f"n = {n} is below the first event {spec.first_event}")
    if spec.variant == "periodic-floor":
        return spec.lam ** (1 + (n - spec.n1) // spec.M)
    value = 1.0
    for _, lam in spec.schedule.events(n):
        value *= lam
    return value


def envelope_values(spec: EnvelopeSpec, n_max: int) -> np.ndarray:
    """``E(n)`` for ``n = 0..n_max`` with NaN below the first event (linear time)."""
    out = np.full(n_max + 1, np.nan)
    if spec.variant == "periodic-floor":
        for n in range(spec.n1, n_max + 1):
            out[n] = spec.lam ** (1 + (n - spec.n1) // spec.M)
        return out
    value = 1.0
    events = dict(spec.schedule.events(n_max))
    started = False
    for n in range(n_max + 1):
        if n in events:
            value *= events[n]
            started = True
        if started:
            out[n] = value
    return out


# ---------------------------------------------------------------------------
# Orbits


@dataclass(frozen=True, eq=False)
class OrbitTrace:
    ns: np.ndarray
    xs: np.ndarray
    dists: np.ndarray
    z: np.ndarray
    schedule: EventSchedule | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return int(self.ns[-1])

    def dist(self, n: int) -> float:
        return float(self.dists[n])


def run_orbit(source: OperatorSource, x0, z, n_max: int, *, schedule: EventSchedule | None = None,
              waive_fixed_check: bool = False, tol: float = TOL, metadata: dict | None = None) -> OrbitTrace:
    """Iterate ``x_n = T_n(x_{n-1})`` for ``n = 1..n_max`` and record ``||x_n - z||``.

    ``z`` must be fixed by every operator used (within ``tol``) unless
    ``waive_fixed_check`` is set, e.g. for counterexample runs.
    """
    if n_max < 0 or n_max > MAX_STEPS:
        raise ValueError(f"n_max must lie in [0, {MAX_STEPS}]")
    x = np.array(x0, dtype=float)
    z = np.array(z, dtype=float)
    if x.shape != z.shape or x.ndim != 1:
        raise DimensionError("x0 and z must be vectors of equal length")
    xs = np.empty((n_max + 1, x.size))
    xs[0] = x
    checked: dict[int, float] = {}
    for t in range(1, n_max + 1):
        op = operator_at(source, t)
        if op.dim != x.size:
            raise DimensionError(f"operator at step {t} has dimension {op.dim}, state has {x.size}")
        if not waive_fixed_check and id(op) not in checked:
            r = fixed_residual(op, z)
            if r > tol:
                raise FixedPointError(f"z is not fixed by the operator at step {t} (residual {r:.3e})")
            checked[id(op)] = r
        x = op.apply(x)
        xs[t] = x
    dists = np.linalg.norm(xs - z, axis=1)
    dists[dists < DENORMAL_FLOOR] = 0.0
    meta = {"tol": tol, "fixed_check_waived": waive_fixed_check}
    if not callable(source) or isinstance(source, (list, tuple)):
        try:
            meta["operators"] = [op.to_dict() for op in (source if isinstance(source, (list, tuple)) else [source])]
        except Exception:
            pass
    if schedule is not None:
        meta["schedule"] = schedule.to_dict()
    meta.update(metadata or {})
    return OrbitTrace(np.arange(n_max + 1), xs, dists, z, schedule, meta)


def _dists_of(trace) -> np.ndarray:
    return trace.dists if isinstance(trace, OrbitTrace) else np.asarray(trace, dtype=float)


def fejer_monotone(trace_or_xs, points, tol: float = EQ_TOL) -> int | None:
    """First ``n`` where the distance to some reference point increases, else ``None``."""
    xs = trace_or_xs.xs if isinstance(trace_or_xs, OrbitTrace) else np.asarray(trace_or_xs, dtype=float)
    for p in points:
        d = np.linalg.norm(xs - np.asarray(p, dtype=float), axis=1)
        bad = np.nonzero(d[1:] > d[:-1] + tol)[0]
        if bad.size:
            return int(bad[0] + 1)
    return None


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class BlockCertificate:
    k: int
    start: int
    end: int
    factor_product: float
    exact: float | None
    claimed: float | None

    @property
    def certificate(self) -> float:
        return self.factor_product if self.exact is None else min(self.factor_product, self.exact)

    @property
    def ok(self) -> bool:
        return self.claimed is None or self.certificate <= self.claimed + TOL


def block_map(source: OperatorSource, start: int, end: int) -> Composition:
    """``Φ(end : start) = T_end ∘ ... ∘ T_start``."""
    return Composition([operator_at(source, t) for t in range(end, start - 1, -1)])


def block_certify(source: OperatorSource, schedule, n_max: int | None = None, strict: bool = True) -> list[BlockCertificate]:
    """Certify ``Lip(Φ(n_k : n_{k-1}+1))`` for every block ending at or before ``n_max``.

    ``schedule`` is an :class:`EventSchedule` or a plain list of event
    indices (no claims).  Affine blocks also get the exact spectral norm of
    their composed linear part.  With ``strict``, an uncertifiable claim
    raises :class:`CertificationError`.
    """
    if not isinstance(schedule, EventSchedule):
        schedule = EventSchedule.explicit(schedule)
    if n_max is None:
        if schedule.variant == "periodic":
            n_max = schedule.n1 + 4 * schedule.M
        elif schedule.variant == "heterogeneous" and schedule.cyclic:
            n_max = sum(n for _, n in schedule.blocks)
        else:
            n_max = max(n for n, _ in schedule.iter_events())
    out = []
    prev = 0
    for k, (n, lam) in enumerate(schedule.events(n_max), start=1):
        phi = block_map(source, prev + 1, n)
        parts = phi.affine_parts()
        exact = operator_norm(parts[0]) if parts is not None else None
        cert = BlockCertificate(k, prev + 1, n, phi.lipschitz_upper, exact, lam)
        if strict and not cert.ok:
            raise CertificationError(
                f"block {k} ({prev + 1}..{n}) certificate {cert.certificate:.12g} exceeds claim {lam}",
                block=k, certificate=cert.certificate,
            )
        out.append(cert)
        prev = n
    return out


# ---------------------------------------------------------------------------
# Envelope certification


@dataclass(frozen=True)
class EnvelopeReport:
    certified: bool
    first_violation: int | None
    max_slack: float
    min_slack: float
    equality_at: tuple
    event_indices: tuple
    equality_at_events: bool
    tight_everywhere: bool
    reference_index: int
    reference_dist: float

    def as_dict(self) -> dict:
        return {
            "certified": self.certified,
            "first_violation": self.first_violation,
            "max_slack": self.max_slack,
            "min_slack": self.min_slack,
            "equality_at": list(self.equality_at),
            "equality_at_events": self.equality_at_events,
            "tight_everywhere": self.tight_everywhere,
            "reference_index": self.reference_index,
            "reference_dist": self.reference_dist,
        }


def envelope_check(trace, spec: EnvelopeSpec, tol: float = TOL, eq_tol: float = EQ_TOL) -> EnvelopeReport:
    """Check ``dist(n) <= E(n) * dist(ref) + tol`` for every ``n >= n_1`` in the trace.

    Equality (within ``eq_tol``) is recorded per index; ``tight_everywhere``
    means the bound is attained at all checked indices.
    """
    d = _dists_of(trace)
    n_max = d.size - 1
    ref = spec.reference_index
    if not (0 <= ref <= n_max):
        raise ValueError(f"reference index {ref} outside the trace")
    n1 = spec.first_event
    if n1 > n_max:
        raise ValueError(f"trace ends at {n_max}, before the first event {n1}")
    env = envelope_values(spec, n_max)
    bound = env[n1:] * d[ref]
    obs = d[n1:]
    slack = bound - obs
    viol = np.nonzero(obs > bound + tol)[0]
    eq = np.nonzero(np.abs(slack) <= eq_tol)[0] + n1
    events = tuple(n for n in range(n1, n_max + 1) if spec.is_event(n))
    eq_set = set(eq.tolist())
    return EnvelopeReport(
        certified=viol.size == 0,
        first_violation=int(viol[0] + n1) if viol.size else None,
        max_slack=float(slack.max()),
        min_slack=float(slack.min()),
        equality_at=tuple(int(n) for n in eq),
        event_indices=events,
        equality_at_events=all(n in eq_set for n in events),
        tight_everywhere=len(eq_set) == obs.size,
        reference_index=ref,
        reference_dist=float(d[ref]),
    )


def log_slope_between_events(spec: EnvelopeSpec, k: int = 1) -> float:
    """``(ln E(n_{k+1}) - ln E(n_k)) / (n_{k+1} - n_k)``."""
    if spec.variant == "periodic-floor":
        a = spec.n1 + (k - 1) * spec.M
        b = a + spec.M
    else:
        ev = [n for n, _ in itertools.islice(spec.schedule.iter_events(), k + 1)]
        if len(ev) < k + 1:
            raise ValueError("not enough events")
        a, b = ev[k - 1], ev[k]
    return (math.log(envelope_value(spec, b)) - math.log(envelope_value(spec, a))) / (b - a)


# ---------------------------------------------------------------------------
# Slopes


@dataclass(frozen=True)
class SlopeBounds:
    K: int
    prefix_slope: float
    m_bounded: float | None


def slope_bounds(schedule: EventSchedule, K: int | None = None) -> SlopeBounds:
    """Finite-prefix log-slope surrogates over the first ``K`` blocks.

    ``prefix_slope = sum(ln lam_j) / sum(N_j)``; when a gap bound ``M`` is
    declared, also ``m_bounded = (1/M) * mean(ln lam_j)``.
    """
    if K is None:
        if schedule.variant == "heterogeneous" and not schedule.cyclic:
            K = len(schedule.blocks)
        elif schedule.variant == "explicit":
            K = len(schedule.indices)
        else:
            raise ValueError("K is required for unbounded schedules")
    if K < 1:
        raise ValueError("empty schedule prefix")
    blocks = schedule.prefix_blocks(K)
    if len(blocks) < K:
        raise ValueError(f"schedule has only {len(blocks)} blocks")
    if any(lam is None for lam, _ in blocks):
        raise ValueError("slope bounds need a factor for every block")
    logs = [math.log(lam) for lam, _ in blocks]
    total = math.fsum(logs)
    prefix = total / sum(n for _, n in blocks)
    m = schedule.gap_bound
    m_bounded = None
    if m is not None:
        if any(n > m for _, n in blocks):
            raise ValueError("a block exceeds the declared gap bound")
        m_bounded = total / (m * K)
    return SlopeBounds(K, prefix, m_bounded)


def borderline_schedule(K: int) -> EventSchedule:
    """Blocks ``(1 - 1/k^2, k^2)`` for ``k = 2 .. K + 1`` (``k = 1`` would give factor 0)."""
    return EventSchedule.heterogeneous([(1.0 - 1.0 / (k * k), k * k) for k in range(2, K + 2)])


# ---------------------------------------------------------------------------
# Single-map results


def _power_certificate(t: OperatorMap, p: int) -> float:
    parts = t.affine_parts()
    if parts is not None:
        return operator_norm(np.linalg.matrix_power(parts[0], p))
    return t.lipschitz_upper ** p


@dataclass(frozen=True)
class PowerIndex:
    N: int | None
    certificate: float
    best: float
    later_powers: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.N is not None

    @property
    def later_ok(self) -> bool:
        return all(v <= self._target + TOL for v in self.later_powers.values())

    _target: float = 1.0


def power_contraction_index(t: OperatorMap, lam_target: float, N_max: int = 1000) -> PowerIndex:
    """Smallest ``N <= N_max`` with certified ``Lip(T^N) <= lam_target``.

    Affine maps use the exact spectral norm of ``L^N``; other maps the
    power of their certificate.  When found, a sample of later powers is
    certified too (they can only shrink for a nonexpansive ``T``).
    """
    if not (0.0 < lam_target < 1.0):
        raise ValueError("lam_target must lie in (0, 1)")
    if t.lipschitz_upper > 1.0 + TOL:
        raise PreconditionError(f"map is not certified nonexpansive (Lip <= {t.lipschitz_upper:.6g})")
    parts = t.affine_parts()
    lin = parts[0] if parts is not None else None
    best = math.inf
    acc = np.eye(t.dim) if lin is not None else None
    for n in range(1, N_max + 1):
        if lin is not None:
            acc = lin @ acc
            cert = operator_norm(acc)
        else:
            cert = t.lipschitz_upper ** n
        best = min(best, cert)
        if cert <= lam_target:
            later = {p: _power_certificate(t, p) for p in sorted({n + 1, n + 2, n + 3, 2 * n, 3 * n, n + 10})}
            return PowerIndex(n, cert, best, later, lam_target)
    return PowerIndex(None, best, best, {}, lam_target)


@dataclass(frozen=True)
class ClassicalRateReport:
    N: int
    lam: float
    certificate: float
    z: np.ndarray
    inheritance_residual: float
    dists: np.ndarray
    violations: tuple
    equality_everywhere: bool
    block_bound_violations: tuple

    @property
    def passed(self) -> bool:
        return not self.violations and self.inheritance_residual <= TOL


def classical_rate_check(t: OperatorMap, N: int, lam: float, x0, n_max: int, z=None, tol: float = TOL) -> ClassicalRateReport:
    """Check ``||T^n x - z|| <= lam^(n-N+1) ||T^(N-1) x - z||`` for ``N <= n <= n_max``.

    Refuses unless ``Lip(T^N) <= lam < 1`` is certified.  ``z`` is the fixed
    point of ``T^N`` (solved exactly for affine maps, else supplied), and
    ``T z = z`` is checked as well.  The weaker per-block bound
    ``lam^(n // N) ||x - z||`` is reported alongside.
    """
    if N < 1 or not (0.0 < lam < 1.0):
        raise ValueError("need N >= 1 and lam in (0, 1)")
    cert = _power_certificate(t, N)
    if cert > lam + tol:
        raise PreconditionError(f"Lip(T^{N}) certificate {cert:.6g} exceeds lambda = {lam}")
    if z is None:
        parts = Composition([t] * N).affine_parts()
        if parts is None:
            raise PreconditionError("z must be supplied for a non-affine map")
        lin, off = parts
        z = np.linalg.solve(np.eye(t.dim) - lin, off)
    z = np.asarray(z, dtype=float)
    inherit = fixed_residual(t, z)
    xs = [np.asarray(x0, dtype=float)]
    for _ in range(n_max):
        xs.append(t.apply(xs[-1]))
    d = np.linalg.norm(np.array(xs) - z, axis=1)
    violations, equal = [], True
    for n in range(N, n_max + 1):
        bound = lam ** (n - N + 1) * d[N - 1]
        if d[n] > bound + tol:
            violations.append(n)
        if abs(d[n] - bound) > EQ_TOL * max(1.0, bound):
            equal = False
    block_viol = tuple(n for n in range(n_max + 1) if d[n] > lam ** (n // N) * d[0] + tol)
    return ClassicalRateReport(N, lam, cert, z, inherit, d, tuple(violations), equal, block_viol)


# ---------------------------------------------------------------------------
# Anchored convergence on an invariant subspace


@dataclass(frozen=True)
class AnchoredReport:
    commutator_norm: float
    restricted_certificate: float
    z: np.ndarray
    global_fixed_dim: int
    dists: np.ndarray
    violations: tuple
    equality_everywhere: bool

    @property
    def passed(self) -> bool:
        return not self.violations


def _real_projection(p) -> np.ndarray:
    m = p.matrix if isinstance(p, ProjectionOp) else ProjectionOp(p).matrix
    if np.max(np.abs(m.imag)) > TOL:
        raise PreconditionError("anchor must be a real projection for maps on R^n")
    return np.array(m.real)


def anchored_run(t: OperatorMap, p, x0, N: int, lam: float, n_max: int, tol: float = TOL) -> AnchoredReport:
    """Iterate an affine ``T`` inside ``ran P`` when ``TP = PT``.

    The restriction ``T|PH`` is compressed onto an orthonormal basis of
    ``ran P`` so that ``Lip((T|PH)^N)`` is an exact spectral norm.  Checks
    ``||P T^n x - z|| <= lam^(n-N+1) ||T^(N-1)(P x) - z||`` for ``N <= n <= n_max``.
    """
    parts = t.affine_parts()
    if parts is None:
        raise PreconditionError("anchored run needs an affine map")
    lin, off = parts
    pm = _real_projection(p)
    if pm.shape != lin.shape:
        raise DimensionError("projection and map have different dimensions")
    comm = max(operator_norm(lin @ pm - pm @ lin), float(np.linalg.norm(pm @ off - off)))
    if comm > tol:
        raise PreconditionError(f"T and P do not commute: ||[T, P]|| = {comm:.6g}")
    q = ProjectionOp(pm).basis().real
    if q.shape[1] == 0:
        raise PreconditionError("anchor projection is zero")
    lin_p = q.T @ lin @ q
    off_p = q.T @ off
    cert = operator_norm(np.linalg.matrix_power(lin_p, N))
    if cert > lam + tol:
        raise PreconditionError(f"Lip((T|PH)^{N}) = {cert:.6g} exceeds lambda = {lam}")
    z = q @ np.linalg.solve(np.eye(q.shape[1]) - lin_p, off_p)

    fixed = t.fixed_set
    if isinstance(fixed, Point):
        gdim = 0
    elif isinstance(fixed, EmptySet):
        gdim = -1
    else:
        gdim = t.dim - int(np.linalg.matrix_rank(np.eye(t.dim) - lin))

    x = np.asarray(x0, dtype=float)
    u = pm @ x
    dists = [float(np.linalg.norm(pm @ x - z))]
    for _ in range(n_max):
        x = t.apply(x)
        u = t.apply(u)
        if np.linalg.norm(pm @ x - u) > tol * max(1.0, float(np.linalg.norm(u))):
            raise PreconditionError("P T^n x and T^n P x disagree; invariance is broken numerically")
        dists.append(float(np.linalg.norm(pm @ x - z)))
    d = np.array(dists)
    violations, equal = [], True
    for n in range(N, n_max + 1):
        bound = lam ** (n - N + 1) * d[N - 1]
        if d[n] > bound + tol:
            violations.append(n)
        if abs(d[n] - bound) > EQ_TOL * max(1.0, bound):
            equal = False
    return AnchoredReport(comm, cert, z, gdim, d, tuple(violations), equal)


# ---------------------------------------------------------------------------
# Equality-achieving schedules


@dataclass(frozen=True)
class TightSchedule:
    operators: tuple
    schedule: EventSchedule
    envelope: EnvelopeSpec


def tightness_schedule(variant: str, *, lam: float | None = None, M: int | None = None,
                       blocks=None, repeat: int = 1) -> TightSchedule:
    """Operator sequences on R^2 that meet their envelope with equality.

    Inter-event steps are quarter-turn rotations and each event step is
    ``lam_k I``.  ``periodic`` needs ``lam`` and ``M`` (the sequence repeats);
    ``heterogeneous-exact`` takes ``blocks`` of ``(lam_k, N_k)`` repeated
    ``repeat`` times.
    """
    quarter = rotation(math.pi / 2)
    if variant == "periodic":
        if lam is None or M is None:
            raise ValueError("periodic tightness needs lam and M")
        ops = tuple([quarter] * (M - 1) + [scaling(lam)])
        sched = EventSchedule.periodic(lam, M)
        return TightSchedule(ops, sched, EnvelopeSpec.from_schedule(sched))
    if variant == "heterogeneous-exact":
        if not blocks:
            raise ValueError("heterogeneous tightness needs blocks")
        full = list(blocks) * repeat
        ops = []
        for lam_k, n_k in full:
            ops.extend([quarter] * (int(n_k) - 1))
            ops.append(scaling(lam_k))
        sched = EventSchedule.heterogeneous(full)
        return TightSchedule(tuple(ops), sched, EnvelopeSpec.from_schedule(sched))
    raise ValueError(f"unknown tightness variant {variant!r}")


# ---------------------------------------------------------------------------
# Uniqueness of common fixed points


@dataclass(frozen=True)
class UniquenessReport:
    consistent: bool
    conclusive: bool
    distance: float
    factor: float | None
    block: tuple | None
    contracted_distance: float | None


def uniqueness_witness(family: Sequence[OperatorMap], schedule, w, z, *, n_max: int | None = None,
                       tol: float = TOL, fixed_tol: float = TOL) -> UniquenessReport:
    """Two common fixed points under a contractive block must coincide.

    Raises ``FixedPointError`` if either candidate is not fixed by every
    family member.  ``consistent=False`` flags the impossible configuration
    of two distinct fixed points with a certified contractive block.
    """
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    for name, c in (("w", w), ("z", z)):
        bad = [(i, r) for i, t in enumerate(family) if (r := fixed_residual(t, c)) > fixed_tol]
        if bad:
            raise FixedPointError(f"candidate {name} is not fixed by members {[i for i, _ in bad]} "
                                  f"(residuals {[r for _, r in bad]})")
    certs = block_certify(list(family), schedule, n_max=n_max, strict=False)
    contractive = [c for c in certs if c.certificate < 1.0]
    dist = float(np.linalg.norm(w - z))
    if not contractive:
        return UniquenessReport(True, False, dist, None, None, None)
    c = min(contractive, key=lambda c: c.certificate)
    phi = block_map(list(family), c.start, c.end)
    contracted = float(np.linalg.norm(phi.apply(w) - phi.apply(z)))
    return UniquenessReport(dist <= tol, True, dist, c.certificate, (c.start, c.end), contracted)


# ---------------------------------------------------------------------------
# CSV trace format


CSV_HEADER = ("n", "dist", "envelope", "event_flag")


def _fmt(x: float) -> str:
    return repr(float(x))


def trace_to_csv(trace: OrbitTrace, spec: EnvelopeSpec | None = None) -> str:
    """``n,dist,envelope,event_flag`` rows with shortest round-trip floats.

    ``envelope`` is ``E(n) * dist(reference)`` (blank before the first event
    or without a spec); ``event_flag`` marks schedule events.
    """
    n_max = trace.n_max
    env = envelope_values(spec, n_max) * trace.dists[spec.reference_index] if spec is not None else None
    if trace.schedule is not None:
        events = {n for n, _ in trace.schedule.events(n_max)}
    elif spec is not None:
        events = {n for n in range(n_max + 1) if n >= spec.first_event and spec.is_event(n)}
    else:
        events = set()
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for n in range(n_max + 1):
        e = "" if env is None or np.isnan(env[n]) else _fmt(env[n])
        buf.write(f"{n},{_fmt(trace.dists[n])},{e},{int(n in events)}\n")
    return buf.getvalue()


def read_trace_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse a trace CSV; returns ``(ns, dists, event_flags)``."""
    import csv

    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"trace CSV must start with header {','.join(CSV_HEADER)}")
    ns, ds, fl = [], [], []
    for i, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        if len(r) != 4:
            raise ValueError(f"line {i}: expected 4 fields")
        ns.append(int(r[0]))
        ds.append(float(r[1]))
        fl.append(int(r[3]))
    ns_arr = np.array(ns)
    if ns_arr.size == 0 or np.any(ns_arr != np.arange(ns_arr.size)):
        raise ValueError("trace rows must be n = 0, 1, 2, ... without gaps")
    return ns_arr, np.array(ds), np.array(fl)


# ---------------------------------------------------------------------------
# Dict forms (config files, ``check --envelope``)


def _only_keys(d: dict, allowed: set, what: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ValueError(f"unknown {what} field(s): {sorted(extra)}")


def schedule_from_dict(d: dict) -> EventSchedule:
    variant = d.get("variant")
    if variant == "periodic":
        _only_keys(d, {"variant", "lambda", "M", "n1"}, "schedule")
        return EventSchedule.periodic(d["lambda"], d["M"], d.get("n1"))
    if variant == "heterogeneous":
        _only_keys(d, {"variant", "blocks", "cyclic", "gap_bound"}, "schedule")
        return EventSchedule.heterogeneous(d["blocks"], bool(d.get("cyclic", False)), d.get("gap_bound"))
    if variant == "explicit":
        _only_keys(d, {"variant", "indices", "factors"}, "schedule")
        return EventSchedule.explicit(d["indices"], d.get("factors"))
    raise ValueError(f"unknown schedule variant {variant!r}")


def envelope_from_dict(d: dict) -> EnvelopeSpec:
    variant = d.get("variant")
    ref = int(d.get("reference_index", 0))
    if variant == "periodic-floor":
        _only_keys(d, {"variant", "lambda", "M", "n1", "reference_index"}, "envelope")
        return EnvelopeSpec.periodic(d["lambda"], d["M"], d.get("n1", d["M"]), ref)
    if variant == "heterogeneous-product":
        _only_keys(d, {"variant", "schedule", "reference_index"}, "envelope")
        return EnvelopeSpec.from_schedule(schedule_from_dict(d["schedule"]), ref)
    raise ValueError(f"unknown envelope variant {variant!r}")
