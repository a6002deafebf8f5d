"""Projection-valued propositions, binary valuations and the anchored implication.

A proposition is an orthogonal projection ``E_A``; a unit state ``psi``
makes ``A`` true exactly when ``E_A psi = psi``.  The anchored implication
``A =>_P B`` is true at ``psi`` when ``A`` is false, or when ``A`` and ``B``
are both true *and* ``E_B`` commutes with the anchor ``P``.  The commutation
test does not depend on the state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, PreconditionError, PremiseError
from .linalg import (
    DEFAULT_TOL,
    EffectOp,
    ProjectionOp,
    StateVector,
    commutator,
    diag_projection,
    identity_projection,
    operator_norm,
    projection_leq,
    rank_one_projection,
    spectral_threshold_projection,
    subspace_join,
    subspace_meet,
    threshold_tie_eigenvalues,
    zero_projection,
)

MEMBERSHIP_TOL = 1e-9
COMMUTE_TOL = DEFAULT_TOL


@dataclass(frozen=True, eq=False)
class Proposition:
    projection: ProjectionOp
    label: str = ""

    @property
    def dim(self) -> int:
        return self.projection.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.projection.matrix

    def __repr__(self):
        return f"Proposition({self.label or '?'}, rank={self.projection.rank})"


def proposition(p, label: str = "") -> Proposition:
    if isinstance(p, Proposition):
        return p
    if not isinstance(p, ProjectionOp):
        p = ProjectionOp(p)
    return Proposition(p, label)


@dataclass(frozen=True, eq=False)
class Anchor:
    """Finite list of generator projections; one generator is the usual anchor ``P``.

    Several generators stand for the algebra they generate: ``B`` satisfies the
    side condition when ``E_B`` commutes with every generator.
    """

    generators: tuple

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValueError("an anchor needs at least one generator")
        gens = tuple(g if isinstance(g, ProjectionOp) else ProjectionOp(g) for g in gens)
        if len({g.dim for g in gens}) != 1:
            raise DimensionError("anchor generators have different dimensions")
        if all(g.is_zero() for g in gens):
            raise ValueError("anchor must contain a nonzero projection")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def single(cls, p) -> "Anchor":
        return cls((p,))

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    def commutator_norms(self, x) -> list[float]:
        m = x.matrix if hasattr(x, "matrix") else np.asarray(x)
        return [operator_norm(commutator(m, g.matrix)) for g in self.generators]

    def commutes_with(self, x, tol: float = COMMUTE_TOL) -> bool:
        return all(c <= tol for c in self.commutator_norms(x))


def _as_anchor(anchor) -> Anchor:
    if isinstance(anchor, Anchor):
        return anchor
    return Anchor.single(anchor)


@dataclass(frozen=True)
class Valuation:
    """Binary truth value plus why it came out that way.

    ``side_condition_held`` reports the commutation check independently of
    ``value``; plain propositions have no side condition and report ``True``.
    """

    value: int
    side_condition_held: bool = True
    vacuous: bool = False
    notes: tuple = ()

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError("valuation must be 0 or 1")
        if self.value == 1 and not (self.vacuous or self.side_condition_held):
            raise ValueError("a true valuation needs a vacuous antecedent or a held side condition")

    def __int__(self):
        return self.value

    def __bool__(self):
        return self.value == 1


def _state(psi) -> StateVector:
    return psi if isinstance(psi, StateVector) else StateVector(psi)


def _check_dims(*objs) -> None:
    dims = {o.dim for o in objs}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


def membership(e, psi, tol: float = MEMBERSHIP_TOL) -> int:
    m = e.matrix if hasattr(e, "matrix") else np.asarray(e)
    v = _state(psi).entries
    return int(np.linalg.norm(m @ v - v) <= tol)


def valuate(a, psi, tol: float = MEMBERSHIP_TOL) -> Valuation:
    """1 iff ``||E_A psi - psi|| <= tol``."""
    a = proposition(a)
    psi = _state(psi)
    _check_dims(a, psi)
    return Valuation(membership(a.projection, psi, tol))


def commutation_side_condition(b, anchor, tol: float = COMMUTE_TOL) -> bool:
    b = proposition(b)
    anchor = _as_anchor(anchor)
    _check_dims(b, anchor)
    return anchor.commutes_with(b.projection, tol)


def anchored_implication(a, b, anchor, psi, tol: float = MEMBERSHIP_TOL) -> Valuation:
    a, b = proposition(a), proposition(b)
    anchor = _as_anchor(anchor)
    psi = _state(psi)
    _check_dims(a, b, anchor, psi)
    side = anchor.commutes_with(b.projection)
    if not valuate(a, psi, tol):
        return Valuation(1, side, vacuous=True)
    return Valuation(int(bool(valuate(b, psi, tol)) and side), side)


def material_implication(a, b, psi, tol: float = MEMBERSHIP_TOL) -> int:
    """Truth-functional ``not v(A) or v(B)``."""
    return int((not valuate(a, psi, tol)) or bool(valuate(b, psi, tol)))


def _require_commuting(pairs, what: str) -> None:
    failures = [(name, c) for name, c in pairs if c > COMMUTE_TOL]
    if failures:
        detail = ", ".join(f"||{name}|| = {c:.3e}" for name, c in failures)
        raise PreconditionError(f"{what} needs a commuting context; failing commutators: {detail}")


def _context_commutators(anchor: Anchor, named) -> list:
    out = []
    for name, x in named:
        for i, c in enumerate(anchor.commutator_norms(x)):
            out.append((f"[{name}, P{i}]" if len(anchor.generators) > 1 else f"[{name}, P]", c))
    return out


def reduced_implication_projection(a, b, anchor) -> ProjectionOp:
    """``I - E_A + E_A E_B`` for a commuting context.

    Refuses unless ``E_A`` and ``E_B`` commute with every anchor generator
    and with each other (otherwise the expression is not a projection).
    """
    a, b = proposition(a), proposition(b)
    anchor = _as_anchor(anchor)
    _check_dims(a, b, anchor)
    checks = _context_commutators(anchor, [("E_A", a.projection), ("E_B", b.projection)])
    checks.append(("[E_A, E_B]", operator_norm(commutator(a.matrix, b.matrix))))
    _require_commuting(checks, "reduced implication")
    ea, eb = a.matrix, b.matrix
    m = np.eye(a.dim) - ea + ea @ eb
    return ProjectionOp(0.5 * (m + m.conj().T))


def sasaki_hook(a, b) -> ProjectionOp:
    """``A^perp ∨ (A ∧ B)``."""
    a, b = proposition(a), proposition(b)
    _check_dims(a, b)
    return subspace_join(a.projection.complement(), subspace_meet(a.projection, b.projection))


# ---------------------------------------------------------------------------
# No uniform Boolean synonym


@dataclass(frozen=True)
class SynonymRow:
    ab: str
    noncommuting: int
    commuting: int
    classical: int

    @property
    def match(self) -> bool:
        return self.noncommuting == self.commuting


@dataclass(frozen=True)
class NoSynonymTable:
    rows: tuple
    mismatch_rows: tuple
    cases_checked: int
    regime_consistent: bool

    def as_dict(self) -> dict:
        return {
            "rows": [
                {
                    "AB": r.ab,
                    "anchored_noncommuting": r.noncommuting,
                    "anchored_commuting": r.commuting,
                    "not_A_or_B": r.classical,
                    "match": r.match,
                }
                for r in self.rows
            ],
            "mismatch_rows": list(self.mismatch_rows),
            "cases_checked": self.cases_checked,
            "regime_consistent": self.regime_consistent,
        }


def no_synonym_table() -> NoSynonymTable:
    """Truth tables of ``A =>_P B`` in a commuting and a non-commuting anchor regime on ``C^2``.

    Every combination of coordinate propositions ``{0, e1, e2, I}``, states
    ``{e1, e2, (e1 ± e2)/sqrt2}`` and regime anchors is evaluated; within a
    regime the implication must depend only on ``(v(A), v(B))``.
    """
    e1 = StateVector.basis(2, 0)
    e2 = StateVector.basis(2, 1)
    states = [e1, e2, StateVector.normalized([1, 1]), StateVector.normalized([1, -1])]
    props = {
        "0": zero_projection(2),
        "e1": diag_projection([1, 0]),
        "e2": diag_projection([0, 1]),
        "I": identity_projection(2),
    }
    regimes = {
        "commuting": [Anchor.single(diag_projection([1, 0])), Anchor.single(identity_projection(2))],
        "noncommuting": [
            Anchor.single(rank_one_projection([1, 1])),
            Anchor.single(rank_one_projection([1, -1])),
        ],
    }
    seen: dict = {"commuting": {}, "noncommuting": {}}
    consistent = True
    cases = 0
    for regime, anchors in regimes.items():
        for anchor, (na, ea), (nb, eb), psi in itertools.product(
            anchors, props.items(), props.items(), states
        ):
            side = anchor.commutes_with(eb)
            if regime == "commuting" and not (side and anchor.commutes_with(ea)):
                continue
            if regime == "noncommuting" and side:
                continue
            row = f"{valuate(ea, psi).value}{valuate(eb, psi).value}"
            val = anchored_implication(ea, eb, anchor, psi).value
            cases += 1
            prev = seen[regime].setdefault(row, val)
            if prev != val:
                consistent = False
    rows = []
    for ab in ("00", "01", "10", "11"):
        a_true, b_true = ab[0] == "1", ab[1] == "1"
        rows.append(
            SynonymRow(
                ab,
                noncommuting=seen["noncommuting"].get(ab, -1),
                commuting=seen["commuting"].get(ab, -1),
                classical=int((not a_true) or b_true),
            )
        )
    mismatches = tuple(r.ab for r in rows if not r.match)
    return NoSynonymTable(tuple(rows), mismatches, cases, consistent)


# ---------------------------------------------------------------------------
# Residuation and sequent rules


def residuation_check(a, b, x, anchor) -> tuple[bool, bool]:
    """``(X <= A =>_P B, A ∧ X <= B)`` as projection-order tests.

    Requires ``A, B, X`` to commute with the anchor and pairwise with each
    other, so that ``E_{A∧X} = E_A E_X``.
    """
    a, b, x = proposition(a), proposition(b), proposition(x)
    anchor = _as_anchor(anchor)
    _check_dims(a, b, x, anchor)
    checks = _context_commutators(
        anchor, [("E_A", a.projection), ("E_B", b.projection), ("E_X", x.projection)]
    )
    for (na, pa), (nb, pb) in itertools.combinations(
        [("E_A", a.matrix), ("E_B", b.matrix), ("E_X", x.matrix)], 2
    ):
        checks.append((f"[{na}, {nb}]", operator_norm(commutator(pa, pb))))
    _require_commuting(checks, "residuation")
    implication = reduced_implication_projection(a, b, anchor)
    meet = subspace_meet(a.projection, x.projection)
    return projection_leq(x.projection, implication), projection_leq(meet, b.projection)


RULES = ("AI-Intro-Vac", "AI-Intro-Comm", "AI-Elim", "AI-Mono(A)")


@dataclass(frozen=True)
class SequentResult:
    """``applicable``: the rule's premises hold.  ``valid``: the conclusion holds too."""

    rule: str
    applicable: bool
    valid: bool
    detail: str = ""
    counterexample: object = None


def _default_probe_states(props: Sequence[ProjectionOp]) -> list[StateVector]:
    dim = props[0].dim
    vecs = [np.eye(dim)[:, i] for i in range(dim)]
    for p in props:
        for q in (p, p.complement()):
            basis = q.basis()
            vecs.extend(basis[:, j] for j in range(basis.shape[1]))
    return [StateVector.normalized(v) for v in vecs]


def sequent_apply(rule: str, *, a=None, b=None, anchor=None, psi=None, a_prime=None, states=None) -> SequentResult:
    """Check one sequent rule of the anchored implication on concrete data.

    ``AI-Intro-Vac``, ``AI-Intro-Comm`` and ``AI-Elim`` need ``a, b, anchor,
    psi``.  ``AI-Mono(A)`` needs ``a, a_prime, b, anchor`` and tests the
    valuation order ``v(A => B) <= v(A' => B)`` on ``states`` (default: the
    standard basis plus bases of every involved range and its complement).
    """
    if rule not in RULES:
        raise PremiseError(f"unknown rule {rule!r}; expected one of {RULES}")
    required = {"a": a, "b": b, "anchor": anchor}
    if rule == "AI-Mono(A)":
        required["a_prime"] = a_prime
    else:
        required["psi"] = psi
    missing = [k for k, v in required.items() if v is None]
    if missing:
        raise PremiseError(f"{rule} is missing premises: {', '.join(missing)}")

    a, b = proposition(a), proposition(b)
    anchor = _as_anchor(anchor)
    side = commutation_side_condition(b, anchor)

    if rule == "AI-Mono(A)":
        a_prime = proposition(a_prime)
        _check_dims(a, a_prime, b, anchor)
        below = projection_leq(a.projection, a_prime.projection)
        if not (below and side):
            return SequentResult(rule, False, False, f"E_A <= E_A': {below}; [E_B,P]=0: {side}")
        probes = [_state(s) for s in states] if states is not None else _default_probe_states(
            [a.projection, a_prime.projection, b.projection]
        )
        for s in probes:
            lhs = anchored_implication(a, b, anchor, s).value
            rhs = anchored_implication(a_prime, b, anchor, s).value
            if lhs > rhs:
                return SequentResult(
                    rule, True, False, f"v(A=>B)={lhs} > v(A'=>B)={rhs}", counterexample=s
                )
        return SequentResult(rule, True, True, f"order holds on {len(probes)} states")

    psi = _state(psi)
    _check_dims(a, b, anchor, psi)
    va, vb = valuate(a, psi).value, valuate(b, psi).value
    imp = anchored_implication(a, b, anchor, psi)
    if rule == "AI-Intro-Vac":
        if va != 0:
            return SequentResult(rule, False, False, "v(A) = 1")
        return SequentResult(rule, True, imp.value == 1, "vacuous antecedent")
    if rule == "AI-Intro-Comm":
        if not (va == 1 and vb == 1 and side):
            return SequentResult(rule, False, False, f"v(A)={va}, v(B)={vb}, [E_B,P]=0: {side}")
        return SequentResult(rule, True, imp.value == 1, "A, B true in commuting context")
    # AI-Elim
    if not (imp.value == 1 and va == 1 and side):
        return SequentResult(rule, False, False, f"v(A=>B)={imp.value}, v(A)={va}, [E_B,P]=0: {side}")
    return SequentResult(rule, True, vb == 1, f"v(B)={vb}")


# ---------------------------------------------------------------------------
# Thresholded effects


def _as_effect(x) -> EffectOp:
    return x if isinstance(x, EffectOp) else EffectOp(x)


def tau_anchored_implication(a, b, anchor, tau: float, psi) -> Valuation:
    """Anchored implication between the threshold projections ``1_[tau,1](A)``, ``1_[tau,1](B)``.

    The side condition is checked on the effect ``B`` itself.  When it fails
    for ``B`` but holds for the thresholded projection, a note is attached.
    """
    a, b = _as_effect(a), _as_effect(b)
    anchor = _as_anchor(anchor)
    psi = _state(psi)
    _check_dims(a, b, anchor, psi)
    pa = spectral_threshold_projection(a, tau)
    pb = spectral_threshold_projection(b, tau)
    side = anchor.commutes_with(b)
    notes = []
    if not side and anchor.commutes_with(pb):
        notes.append("side condition fails on the effect B but holds on its threshold projection")
    for name, x in (("A", a), ("B", b)):
        ties = threshold_tie_eigenvalues(x, tau)
        if ties:
            notes.append(f"eigenvalues of {name} tied with tau included: {ties}")
    if not membership(pa, psi):
        return Valuation(1, side, vacuous=True, notes=tuple(notes))
    return Valuation(int(bool(membership(pb, psi)) and side), side, notes=tuple(notes))


def tau_reduced_projection(a, b, anchor, tau: float) -> ProjectionOp:
    """``I - P_A + P_A P_B`` for effects commuting with the anchor."""
    a, b = _as_effect(a), _as_effect(b)
    anchor = _as_anchor(anchor)
    _check_dims(a, b, anchor)
    _require_commuting(_context_commutators(anchor, [("A", a), ("B", b)]), "tau reduction")
    pa = spectral_threshold_projection(a, tau)
    pb = spectral_threshold_projection(b, tau)
    return reduced_implication_projection(pa, pb, Anchor.single(identity_projection(a.dim)))
