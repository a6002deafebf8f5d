"""Randomized invariants across all modules (``pytest -m invariant``)."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anchorlab.cli import main
from anchorlab.convex import AffineSet, Ball, Box, Halfspace
from anchorlab.iteration import (
    EnvelopeSpec,
    EventSchedule,
    anchored_run,
    block_certify,
    classical_rate_check,
    envelope_check,
    power_contraction_index,
    run_orbit,
    tightness_schedule,
)
from anchorlab.linalg import (
    EffectOp,
    ProjectionOp,
    commutator,
    diag_projection,
    hermitian_eigendecomposition,
    identity_projection,
    operator_norm,
    projection_leq,
    projections_close,
    reconstruct,
    span_projection,
    spectral_threshold_projection,
    subspace_join,
    subspace_meet,
)
from anchorlab.logic import (
    anchored_implication,
    material_implication,
    membership,
    no_synonym_table,
    reduced_implication_projection,
    residuation_check,
    sasaki_hook,
    tau_anchored_implication,
    tau_reduced_projection,
)
from anchorlab.operators import (
    Averaged,
    Projection,
    Resolvent,
    affine,
    common_fixed_point,
    compose,
    fixed_residual,
    lipschitz_certified,
    lipschitz_sampled_lower,
    rotation,
    scaling,
)
from anchorlab.scenarios import random_commuting_triple, random_joint_eigenstate, random_unitary

pytestmark = pytest.mark.invariant

TOL = 1e-10
seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6)


def random_hermitian(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (z + z.conj().T)


def random_projection(rng, dim, shared=None):
    k = int(rng.integers(0, dim + 1))
    vecs = [rng.standard_normal(dim) + 1j * rng.standard_normal(dim) for _ in range(k)]
    if shared is not None:
        vecs.append(shared)
    return span_projection(vecs, dim=dim)


def random_effect(rng, u, avoid=None):
    vals = rng.uniform(0.0, 1.0, u.shape[0])
    if avoid is not None:
        # keep eigenvalues off the threshold so tie handling is not what is being tested
        vals = np.where(np.abs(vals - avoid) < 1e-6, avoid + 1e-3, vals)
    return EffectOp((u * vals) @ u.conj().T, tol=1e-9), vals


def random_contraction(rng, dim, bound):
    m = rng.standard_normal((dim, dim))
    return bound * rng.uniform(0.2, 1.0) * m / np.linalg.norm(m, 2)


def assert_projection(e, tol=TOL):
    m = e.matrix
    assert operator_norm(m @ m - m) <= tol
    assert operator_norm(m - m.conj().T) <= tol


# ---------------------------------------------------------------------------
# linear algebra


class TestLinalg:
    @given(seeds, dims)
    def test_constructed_projections_are_projections(self, seed, dim):
        rng = np.random.default_rng(seed)
        shared = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        e, f = random_projection(rng, dim, shared), random_projection(rng, dim, shared)
        a = EffectOp((lambda u, v: (u * v) @ u.conj().T)(random_unitary(rng, dim), rng.uniform(0, 1, dim)), tol=1e-9)
        for p in (e, f, subspace_meet(e, f), subspace_join(e, f), e.complement(),
                  spectral_threshold_projection(a, float(rng.uniform(0.05, 1.0)))):
            assert_projection(p)

    @given(seeds, dims, st.floats(0.01, 1.0))
    def test_threshold_commutes(self, seed, dim, tau):
        rng = np.random.default_rng(seed)
        a, _ = random_effect(rng, random_unitary(rng, dim))
        p = spectral_threshold_projection(a, tau)
        assert operator_norm(commutator(a.matrix, p.matrix)) <= TOL

    @given(seeds, dims)
    def test_meet_join_duality(self, seed, dim):
        rng = np.random.default_rng(seed)
        shared = rng.standard_normal(dim) + 1j * rng.standard_normal(dim) if rng.integers(2) else None
        e, f = random_projection(rng, dim, shared), random_projection(rng, dim, shared)
        dual = np.eye(dim) - subspace_meet(e.complement(), f.complement()).matrix
        assert np.max(np.abs(subspace_join(e, f).matrix - dual)) <= 1e-9

    @given(seeds, dims)
    def test_meet_is_greatest_lower_bound(self, seed, dim):
        rng = np.random.default_rng(seed)
        shared = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        e, f = random_projection(rng, dim, shared), random_projection(rng, dim, shared)
        m = subspace_meet(e, f)
        assert projection_leq(m, e, 1e-9) and projection_leq(m, f, 1e-9)
        assert membership(m, shared / np.linalg.norm(shared))

    @given(seeds, st.integers(1, 8))
    def test_norm_submultiplicative(self, seed, dim):
        rng = np.random.default_rng(seed)
        a, b = random_hermitian(rng, dim) + rng.standard_normal((dim, dim)), random_hermitian(rng, dim)
        assert operator_norm(a @ b) <= operator_norm(a) * operator_norm(b) + TOL

    @given(seeds, st.integers(1, 8))
    def test_reconstruction(self, seed, dim):
        a = random_hermitian(np.random.default_rng(seed), dim)
        eig = hermitian_eigendecomposition(a)
        assert operator_norm(a - reconstruct(eig)) <= 1e-9


# ---------------------------------------------------------------------------
# anchored implication


def joint_states(rng, u, labels, count):
    return [random_joint_eigenstate(rng, u, labels) for _ in range(count)]


class TestLogic:
    @given(seeds, dims)
    def test_reduction(self, seed, dim):
        rng = np.random.default_rng(seed)
        ea, eb, p, u, labels = random_commuting_triple(rng, dim)
        reduced = reduced_implication_projection(ea, eb, p)
        for psi in joint_states(rng, u, labels, 100):
            assert anchored_implication(ea, eb, p, psi).value == membership(reduced, psi)

    @given(seeds, dims)
    def test_identity_anchor_is_material(self, seed, dim):
        # A, B need not commute here
        rng = np.random.default_rng(seed)
        ea, eb = random_projection(rng, dim), random_projection(rng, dim)
        eye = identity_projection(dim)
        for _ in range(20):
            pool = ea if rng.integers(2) and not ea.is_zero() else eye
            coef = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            v = pool.matrix @ coef
            psi = v / np.linalg.norm(v)
            assert anchored_implication(ea, eb, eye, psi).value == material_implication(ea, eb, psi)

    @given(seeds, dims)
    def test_antecedent_antitone(self, seed, dim):
        # enlarging the antecedent can only make the implication harder to satisfy
        rng = np.random.default_rng(seed)
        _, eb, p, u, labels = random_commuting_triple(rng, dim)
        ea = random_projection(rng, dim)
        extra = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        ea_big = subspace_join(ea, span_projection([extra], dim=dim))
        assert projection_leq(ea, ea_big, 1e-9)
        states = joint_states(rng, u, labels, 30)
        for pool in (ea, ea_big):
            if not pool.is_zero():
                v = pool.matrix @ (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
                states.append(v / np.linalg.norm(v))
        for psi in states:
            big = anchored_implication(ea_big, eb, p, psi, tol=1e-8).value
            small = anchored_implication(ea, eb, p, psi, tol=1e-8).value
            assert big <= small

    def test_no_synonym(self):
        table = no_synonym_table()
        assert table.mismatch_rows == ("11",)
        assert table.regime_consistent

    @given(seeds, dims)
    def test_residuation(self, seed, dim):
        rng = np.random.default_rng(seed)
        u = random_unitary(rng, dim)
        pats = rng.integers(0, 2, size=(4, dim))
        pats[3, rng.integers(dim)] = 1
        a, b, x, p = (ProjectionOp((u * d) @ u.conj().T) for d in pats)
        lhs, rhs = residuation_check(a, b, x, p)
        assert lhs == rhs
        # oracle on the common diagonal: X <= not A or B, pointwise
        assert lhs == bool(np.all(pats[2] <= (1 - pats[0]) | pats[1]))

    @given(seeds, dims, st.floats(0.05, 0.95))
    def test_tau_reduction(self, seed, dim, tau):
        rng = np.random.default_rng(seed)
        u = random_unitary(rng, dim)
        a, av = random_effect(rng, u, tau)
        b, bv = random_effect(rng, u, tau)
        pat = rng.integers(0, 2, dim)
        pat[rng.integers(dim)] = 1
        p = ProjectionOp((u * pat) @ u.conj().T)
        pa, pb = (av >= tau).astype(float), (bv >= tau).astype(float)
        expected = (u * (1 - pa + pa * pb)) @ u.conj().T
        got = tau_reduced_projection(a, b, p, tau)
        assert np.max(np.abs(got.matrix - expected)) <= 1e-9
        for j in range(dim):
            assert tau_anchored_implication(a, b, p, tau, u[:, j]).value == int(1 - pa[j] + pa[j] * pb[j])

    @given(seeds, dims)
    def test_sasaki_agrees_when_commuting(self, seed, dim):
        rng = np.random.default_rng(seed)
        ea, eb, _, _, _ = random_commuting_triple(rng, dim)
        eye = identity_projection(dim)
        assert projections_close(sasaki_hook(ea, eb), reduced_implication_projection(ea, eb, eye), 1e-9)


# ---------------------------------------------------------------------------
# operators


def random_operator(rng, dim):
    kind = int(rng.integers(5))
    if kind == 0:
        return rotation(float(rng.uniform(-math.pi, math.pi))) if dim == 2 else scaling(-1.0, dim)
    if kind == 1:
        return affine(random_contraction(rng, dim, 1.0), rng.standard_normal(dim))
    if kind == 2:
        return Projection(Halfspace(rng.standard_normal(dim), float(rng.standard_normal())))
    if kind == 3:
        return Projection(Ball(rng.standard_normal(dim), float(rng.uniform(0.1, 3))))
    return affine(rng.standard_normal((dim, dim)), rng.standard_normal(dim))


def random_set(rng, dim):
    kind = int(rng.integers(4))
    if kind == 0:
        return Halfspace(rng.standard_normal(dim), float(rng.standard_normal()))
    if kind == 1:
        lo = rng.standard_normal(dim)
        return Box(lo, lo + rng.uniform(0.1, 2, dim))
    if kind == 2:
        return Ball(rng.standard_normal(dim), float(rng.uniform(0.1, 3)))
    rows = int(rng.integers(1, dim + 1))
    return AffineSet(rng.standard_normal((rows, dim)), rng.standard_normal(rows))


def random_monotone(rng, dim):
    b = rng.standard_normal((dim, dim))
    s = rng.standard_normal((dim, dim))
    return b @ b.T + (s - s.T)


class TestOperators:
    @given(seeds, st.integers(2, 4))
    def test_sampled_composition_below_certificates(self, seed, dim):
        rng = np.random.default_rng(seed)
        s, t = random_operator(rng, dim), random_operator(rng, dim)
        sampled = lipschitz_sampled_lower(compose(s, t), trials=200, seed=seed)
        assert sampled <= lipschitz_certified(s) * lipschitz_certified(t) + 1e-9

    @given(seeds, st.integers(1, 5))
    def test_projection_idempotent(self, seed, dim):
        rng = np.random.default_rng(seed)
        p = Projection(random_set(rng, dim))
        for x in rng.uniform(-10, 10, (20, dim)):
            px = p(x)
            assert np.linalg.norm(p(px) - px) <= 1e-9 * max(1.0, np.linalg.norm(px))

    @given(seeds, st.integers(1, 5), st.floats(0.01, 10.0))
    def test_resolvent_nonexpansive(self, seed, dim, gamma):
        rng = np.random.default_rng(seed)
        j = Resolvent(random_monotone(rng, dim), gamma=gamma)
        assert lipschitz_sampled_lower(j, trials=200, seed=seed) <= 1 + 1e-9

    @given(seeds, st.integers(2, 4), st.floats(0.01, 0.99))
    def test_averaged_nonexpansive(self, seed, dim, alpha):
        rng = np.random.default_rng(seed)
        inner = affine(random_contraction(rng, dim, 1.0), rng.standard_normal(dim))
        if rng.integers(2):
            inner = compose(inner, Projection(random_set(rng, dim)))
        assert lipschitz_sampled_lower(Averaged(inner, alpha), trials=200, seed=seed) <= 1 + 1e-9

    @given(seeds, st.integers(1, 4), st.integers(1, 4))
    def test_common_fixed_point_verified(self, seed, dim, m):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(dim)
        fam = []
        for _ in range(m):
            n = rng.standard_normal(dim)
            fam.append(Projection(Halfspace(n, float(n @ c + rng.uniform(0, 1)))))
        res = common_fixed_point(fam, start=rng.uniform(-10, 10, dim))
        assert res.found
        assert all(fixed_residual(t, res.point) <= 1e-9 for t in fam)


# ---------------------------------------------------------------------------
# iteration


def family_fixing(rng, z, dim, count, bound=1.0):
    """Affine maps ``x -> L (x - z) + z`` with ``||L|| <= bound``."""
    return [affine(lin, z - lin @ z) for lin in (random_contraction(rng, dim, bound) for _ in range(count))]


blocks_strategy = st.lists(st.tuples(st.floats(0.05, 0.95), st.integers(1, 5)), min_size=1, max_size=6)


class TestIteration:
    @given(seeds, st.integers(2, 4))
    def test_non_increase(self, seed, dim):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(dim)
        fam = family_fixing(rng, z, dim, 3)
        fam.append(Projection(Ball(z + rng.uniform(-0.5, 0.5, dim), 1.0)))
        tr = run_orbit(fam, rng.uniform(-10, 10, dim), z, 60)
        assert np.all(tr.dists[1:] <= tr.dists[:-1] + 1e-12)

    @given(seeds, st.lists(st.integers(1, 5), min_size=1, max_size=6))
    def test_event_drop(self, seed, gaps):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(2)
        ops = family_fixing(rng, z, 2, sum(gaps))
        ends = np.cumsum(gaps).tolist()
        schedule = EventSchedule.explicit(ends)
        certs = block_certify(ops, schedule)
        tr = run_orbit(ops, rng.uniform(-10, 10, 2), z, ends[-1])
        prev = 0
        for c in certs:
            assert tr.dist(c.end) <= c.certificate * tr.dist(prev) + 1e-12
            prev = c.end

    @given(seeds, st.floats(0.05, 0.95), st.integers(1, 6), st.integers(1, 8))
    def test_periodic_dominance_from_start(self, seed, lam, M, periods):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(2)
        ops = family_fixing(rng, z, 2, M - 1) + family_fixing(rng, z, 2, 1, bound=lam)
        schedule = EventSchedule.periodic(lam, M)
        block_certify(ops, schedule, n_max=M * periods)
        tr = run_orbit(ops, rng.uniform(-10, 10, 2), z, M * periods + M - 1, schedule=schedule)
        assert envelope_check(tr, EnvelopeSpec.periodic(lam, M, M)).certified

    @given(seeds, blocks_strategy)
    def test_heterogeneous_dominance_from_start(self, seed, blocks):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(2)
        ops = []
        for lam, gap in blocks:
            ops += family_fixing(rng, z, 2, gap - 1) + family_fixing(rng, z, 2, 1, bound=lam)
        schedule = EventSchedule.heterogeneous(blocks)
        block_certify(ops, schedule)
        n = sum(g for _, g in blocks)
        tr = run_orbit(ops[:n], rng.uniform(-10, 10, 2), z, n, schedule=schedule)
        assert envelope_check(tr, EnvelopeSpec.from_schedule(schedule)).certified

    @given(st.floats(0.05, 0.95), st.integers(1, 6), st.floats(0.1, 10), st.floats(-math.pi, math.pi))
    def test_periodic_tightness_from_start(self, lam, M, r, phi):
        ts = tightness_schedule("periodic", lam=lam, M=M)
        tr = run_orbit(list(ts.operators), [r * math.cos(phi), r * math.sin(phi)], [0.0, 0.0], 6 * M)
        rep = envelope_check(tr, ts.envelope, eq_tol=1e-12)
        assert rep.tight_everywhere

    @given(blocks_strategy, st.integers(1, 3), st.floats(0.1, 10))
    def test_heterogeneous_tightness_from_start(self, blocks, repeat, r):
        ts = tightness_schedule("heterogeneous-exact", blocks=blocks, repeat=repeat)
        n = repeat * sum(g for _, g in blocks)
        tr = run_orbit(list(ts.operators), [0.0, r], [0.0, 0.0], n)
        rep = envelope_check(tr, ts.envelope, eq_tol=1e-12)
        assert rep.tight_everywhere

    @given(seeds, st.floats(0.05, 0.99))
    def test_single_map_collapse(self, seed, lam):
        rng = np.random.default_rng(seed)
        lin = random_contraction(rng, 2, 1.0)
        t = affine(lin, rng.standard_normal(2))
        idx = power_contraction_index(t, lam, N_max=200)
        if not idx.found:
            return
        assert idx.later_ok
        for p in range(idx.N, idx.N + 5):
            assert np.linalg.norm(np.linalg.matrix_power(lin, p), 2) <= lam + 1e-12
        rep = classical_rate_check(t, idx.N, lam, rng.uniform(-10, 10, 2), 6 * idx.N)
        assert rep.inheritance_residual <= 1e-9
        assert not rep.block_bound_violations

    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_no_events_constant(self, x, y):
        if math.hypot(x, y) == 0.0:
            return
        tr = run_orbit([rotation(math.pi / 2)], [x, y], [0.0, 0.0], 10_000)
        assert np.all(tr.dists == tr.dists[0])

    @given(st.floats(-100, 100).filter(lambda c: c != 0.0), st.floats(-10, 10), st.floats(-10, 10))
    def test_anchored_contrast(self, c, x, y):
        t = affine([[1.0, 0.0], [0.0, 0.5]])
        assert fixed_residual(t, [c, 0.0]) == 0.0
        assert t.fixed_set.contains([c, 0.0])
        rep = anchored_run(t, diag_projection([0, 1]), [x, y], 1, 0.5, 30)
        assert rep.passed and np.array_equal(rep.z, [0.0, 0.0])


# ---------------------------------------------------------------------------
# command line


class TestCli:
    @given(st.sampled_from(["fig1-periodic", "hetero-alternating", "tightness-nonperiodic", "anchored-invariant"]),
           st.integers(0, 2**31 - 1))
    def test_deterministic_output(self, name, seed):
        import contextlib
        import io

        outs = []
        for _ in range(2):
            buf = io.StringIO()
            with contextlib.redirect_stdout(buf):
                assert main(["run", name, "--seed", str(seed)]) == 0
            outs.append(buf.getvalue().encode())
        assert outs[0] == outs[1]

    def test_builtins_self_check(self):
        from anchorlab.scenarios import CATALOG, run_scenario

        for name in CATALOG:
            res = run_scenario(name)
            assert res.passed, (name, res.failures)
            assert all(c.basis for c in res.checks)
