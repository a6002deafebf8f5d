import math

import numpy as np
import pytest

from anchorlab.convex import AffineSet, Ball, Box, EmptySet, Halfspace, Point, set_from_dict, solution_set
from anchorlab.errors import DimensionError, FixedPointError, MetadataError, PreconditionError
from anchorlab.operators import (
    Averaged,
    BlackBox,
    Projection,
    Resolvent,
    affine,
    common_fixed_point,
    compose,
    fixed_residual,
    lipschitz_certified,
    lipschitz_sampled_lower,
    operator_from_dict,
    power,
    prox_l1,
    rotation,
    scaling,
)

QUARTER = rotation(math.pi / 2)


class TestApply:
    def test_quarter_turn(self):
        assert np.array_equal(QUARTER([1.0, 0.0]), [0.0, 1.0])

    def test_diagonal_affine(self):
        assert np.array_equal(affine([[1, 0], [0, 0.5]])([3.0, 2.0]), [3.0, 1.0])

    def test_halfspace_interior(self):
        p = Projection(Halfspace([1.0, 2.0], 4.0))
        assert np.array_equal(p([1.0, 1.0]), [1.0, 1.0])

    def test_halfspace_exterior(self):
        p = Projection(Halfspace([1.0, 0.0], 1.0))
        assert np.allclose(p([3.0, 5.0]), [1.0, 5.0])

    def test_box_and_ball(self):
        assert np.array_equal(Projection(Box([0, 0], [1, 1]))([2.0, -1.0]), [1.0, 0.0])
        assert np.allclose(Projection(Ball([0, 0], 1.0))([3.0, 4.0]), [0.6, 0.8])

    def test_affine_set(self):
        line = Projection(AffineSet([[1.0, 1.0]], [2.0]))
        assert np.allclose(line([0.0, 0.0]), [1.0, 1.0])

    def test_soft_threshold(self):
        assert np.allclose(prox_l1(0.5)([2.0, -0.2]), [1.5, 0.0])

    def test_resolvent(self):
        j = Resolvent([[1.0, 0.0], [0.0, 3.0]], gamma=1.0)
        assert np.allclose(j([2.0, 4.0]), [1.0, 1.0])

    def test_averaged(self):
        t = Averaged(scaling(-1.0), 0.5)
        assert np.allclose(t([2.0, 2.0]), [0.0, 0.0])

    def test_composition_order(self):
        t = compose(affine(np.eye(2), [1.0, 0.0]), QUARTER)
        assert np.allclose(t([1.0, 0.0]), [1.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            QUARTER([1.0, 0.0, 0.0])
        with pytest.raises(DimensionError):
            compose(QUARTER, scaling(0.5, dim=3))


class TestCertificates:
    def test_periodic_block(self):
        assert lipschitz_certified(compose(scaling(0.8), QUARTER, QUARTER, QUARTER)) == pytest.approx(0.8, abs=1e-15)

    def test_prox_and_projection(self):
        assert lipschitz_certified(prox_l1(0.3, 3)) == 1.0
        assert lipschitz_certified(Projection(Ball([0, 0], 2.0))) == 1.0

    def test_affine_power(self):
        lin = np.array([[0.9, 0.0], [0.3, 0.0]])
        lin = 0.9 * lin / np.linalg.norm(lin, 2)
        t = affine(lin, [1.0, -1.0])
        for n in (1, 2, 5):
            assert lipschitz_certified(power(t, n)) <= 0.9 ** n + 1e-12

    def test_affine_exact_norm(self):
        assert lipschitz_certified(affine([[1, 1], [0, 1]])) == pytest.approx(math.sqrt((3 + math.sqrt(5)) / 2), rel=1e-10)

    def test_black_box(self):
        assert math.isinf(lipschitz_certified(BlackBox(np.tanh, 2)))
        box = BlackBox(np.tanh, 2, asserted_lipschitz=1.0)
        assert lipschitz_certified(box) == 1.0
        assert box.provenance == "asserted bound"


class TestSampled:
    def test_isometry_quarter_turn(self):
        v = lipschitz_sampled_lower(QUARTER, seed=1)
        assert 1 - 1e-9 <= v <= 1

    def test_isometry_generic_angle(self):
        # cos/sin rounding leaves the ratio a few ulps off 1
        v = lipschitz_sampled_lower(rotation(0.7), seed=1)
        assert 1 - 1e-9 <= v <= 1 + 1e-12

    def test_scaling(self):
        assert lipschitz_sampled_lower(scaling(0.8)) == pytest.approx(0.8, abs=1e-12)

    def test_halfspace_straddling(self):
        t = Projection(Halfspace([1.0, 0.0], 0.0))
        rng = np.random.default_rng(42)
        xs = rng.uniform(-10, 10, (200, 2))
        ys = rng.uniform(-10, 10, (200, 2))
        ratios = [np.linalg.norm(t(x) - t(y)) / np.linalg.norm(x - y) for x, y in zip(xs, ys)]
        assert 0.0 <= min(ratios) and max(ratios) <= 1.0 + 1e-15
        v = lipschitz_sampled_lower(t, trials=500)
        assert 0.0 <= v <= 1.0 + 1e-15

    def test_deterministic(self):
        t = Resolvent([[2.0, 1.0], [-1.0, 0.5]])
        assert lipschitz_sampled_lower(t, seed=9) == lipschitz_sampled_lower(t, seed=9)

    def test_trials(self):
        with pytest.raises(ValueError):
            lipschitz_sampled_lower(QUARTER, trials=0)


class TestFixedSets:
    def test_solution_set_kinds(self):
        assert isinstance(solution_set(np.eye(2), [1, 2]), Point)
        assert isinstance(solution_set([[1, 0], [0, 0]], [1, 0]), AffineSet)
        assert isinstance(solution_set([[1, 0], [0, 0]], [1, 1]), EmptySet)

    def test_rotation_fixes_origin_only(self):
        fs = rotation(0.3).fixed_set
        assert isinstance(fs, Point) and np.allclose(fs.point, 0)

    def test_degenerate_affine(self):
        fs = affine([[1, 0], [0, 0.5]]).fixed_set
        for c in (-3.0, 0.0, 7.5):
            assert fs.contains([c, 0.0])
        assert not fs.contains([0.0, 1.0])

    def test_translation_has_none(self):
        assert isinstance(affine(np.eye(2), [1, 0]).fixed_set, EmptySet)

    def test_set_round_trip(self):
        for s in (Point([1, 2]), Halfspace([1, 1], 3), Box([0, 0], [1, 2]), Ball([1, 1], 2), AffineSet([[1, 1]], [1])):
            again = set_from_dict(s.to_dict())
            x = np.array([4.0, -2.0])
            assert np.allclose(again.project(x), s.project(x))


class TestCommonFixedPoint:
    def test_two_halfspaces(self):
        fam = [Projection(Halfspace([1.0, 0.0], 0.5)), Projection(Halfspace([0.0, 1.0], 0.5))]
        res = common_fixed_point(fam, start=[5.0, 5.0])
        assert res.found
        assert all(fixed_residual(t, res.point) <= 1e-9 for t in fam)

    def test_tilted_halfspaces_match_alternating_oracle(self):
        h1, h2 = Halfspace([1.0, 1.0], 1.0), Halfspace([1.0, -2.0], 0.5)
        fam = [Projection(h1), Projection(h2)]
        x = np.array([6.0, 1.0])
        for _ in range(100_000):
            y = h2.project(h1.project(x))
            if np.linalg.norm(y - x) < 1e-12:
                break
            x = y
        res = common_fixed_point(fam, start=[6.0, 1.0])
        assert np.allclose(res.point, x, atol=1e-9)
        assert all(fixed_residual(t, res.point) <= 1e-9 for t in fam)

    def test_periodic_family(self):
        res = common_fixed_point([QUARTER, scaling(0.8)])
        assert np.allclose(res.point, 0.0)

    def test_affine_unique(self):
        t = affine([[0.5, 0.1], [0.0, 0.2]], [1.0, 2.0])
        z = common_fixed_point([t]).point
        assert np.allclose((np.eye(2) - t.linear) @ z, t.offset)

    def test_shared_minimizer_and_zero(self):
        c = np.array([1.0, -2.0])
        fam = [prox_l1(0.4, center=c), Resolvent([[2.0, 0.0], [0.0, 1.0]], offset=[2.0, -2.0])]
        assert np.allclose(common_fixed_point(fam).point, c)

    def test_no_common_point(self):
        res = common_fixed_point([Projection(Halfspace([1.0, 0.0], -1.0)), Projection(Halfspace([-1.0, 0.0], -1.0))],
                                 max_iter=1000)
        assert not res.found and "residual" in res.diagnostic

    def test_disjoint_points(self):
        res = common_fixed_point([prox_l1(0.1, center=[0, 0]), prox_l1(0.1, center=[1, 0])])
        assert not res.found

    def test_missing_metadata(self):
        with pytest.raises(MetadataError):
            common_fixed_point([BlackBox(np.tanh, 2)])

    def test_verification_failure(self):
        lying = BlackBox(lambda x: x + 1.0, 2, asserted_lipschitz=1.0, fixed_set=Point([0.0, 0.0]))
        with pytest.raises(FixedPointError):
            common_fixed_point([lying])


class TestDescriptors:
    DESCRIPTORS = [
        {"kind": "rotation", "theta": 1.5707963267948966},
        {"kind": "scaling", "alpha": 0.8, "dim": 2},
        {"kind": "affine", "linear": [[1, 0], [0, 0.5]], "offset": [0, 0]},
        {"kind": "projection", "set": {"type": "halfspace", "normal": [1, 0], "offset": 1}},
        {"kind": "prox", "gamma": 0.5, "center": [0, 0]},
        {"kind": "resolvent", "monotone": [[2, 0], [0, 1]], "gamma": 1.0, "offset": [0, 0]},
        {"kind": "averaged", "alpha": 0.5, "inner": {"kind": "rotation", "theta": 1.0}},
        {"kind": "composition", "factors": [{"kind": "scaling", "alpha": 0.5}, {"kind": "rotation", "theta": 0.5}]},
    ]

    @pytest.mark.parametrize("d", DESCRIPTORS, ids=lambda d: d["kind"])
    def test_round_trip(self, d):
        t = operator_from_dict(d)
        again = operator_from_dict(t.to_dict())
        x = np.array([2.0, -3.0])
        assert np.allclose(again(x), t(x))
        assert again.lipschitz_upper == pytest.approx(t.lipschitz_upper)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            operator_from_dict({"kind": "teleport"})

    def test_non_monotone_resolvent(self):
        with pytest.raises(PreconditionError):
            Resolvent([[-1.0, 0.0], [0.0, 1.0]])

    def test_black_box_has_no_descriptor(self):
        with pytest.raises(MetadataError):
            BlackBox(np.tanh, 2).to_dict()
