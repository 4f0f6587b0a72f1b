import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopkit.geometry import (
    Aabb,
    DegenerateBox,
    Obb,
    Similarity2,
    aabb_of_obb,
    obb_angle,
    obb_aspect_ratio,
    oriented_iou,
    polygon_iou,
    reconstruct_obb,
    transform_obb,
    wrap_angle,
)

from conftest import monte_carlo_iou, random_obb, shapely_iou

TWO_PI = 2.0 * math.pi


obb_strategy = st.builds(
    lambda cx, cy, w, h, th: Obb.from_center_size_angle((cx, cy), w, h, th),
    cx=st.floats(-100, 100),
    cy=st.floats(-100, 100),
    w=st.floats(1.0, 80.0),
    h=st.floats(1.0, 80.0),
    th=st.floats(0.0, TWO_PI, exclude_max=True),
)

similarity_strategy = st.builds(
    lambda s, r, tx, ty: Similarity2(scale=s, rotation=r, translation=(tx, ty)),
    s=st.floats(0.5, 2.0),
    r=st.floats(0.0, TWO_PI, exclude_max=True),
    tx=st.floats(-50, 50),
    ty=st.floats(-50, 50),
)


class TestObb:
    def test_rejects_zero_area(self):
        with pytest.raises(DegenerateBox):
            Obb(np.zeros((4, 2)))

    def test_rejects_counterclockwise(self):
        box = Obb.from_center_size_angle((0, 0), 4, 2)
        with pytest.raises(DegenerateBox):
            Obb(box.vertices[::-1])

    def test_rejects_non_rectangle(self):
        with pytest.raises(DegenerateBox):
            Obb(np.array([[0, 0], [4, 0], [4, 2], [-1, 2]]))

    def test_center_and_sides(self):
        box = Obb.from_center_size_angle((3, -1), 4, 2, math.pi / 3)
        assert np.allclose(box.center, [3, -1])
        assert box.width == pytest.approx(4)
        assert box.height == pytest.approx(2)


class TestObbAngle:
    def test_aligned_with_x_axis(self):
        assert obb_angle(Obb.from_center_size_angle((0, 0), 4, 2, 0.0)) == 0.0

    def test_downward_edge_is_half_pi(self):
        # first edge along +y (image down)
        box = Obb.from_center_size_angle((0, 0), 4, 2, math.pi / 2)
        assert obb_angle(box) == pytest.approx(math.pi / 2)

    def test_upward_edge_is_three_half_pi(self):
        box = Obb.from_center_size_angle((0, 0), 4, 2, 3 * math.pi / 2)
        assert obb_angle(box) == pytest.approx(3 * math.pi / 2)

    @given(obb_strategy)
    def test_range(self, box):
        assert 0.0 <= obb_angle(box) < TWO_PI


class TestAabbOfObb:
    def test_axis_aligned_identity(self):
        a = aabb_of_obb(Obb.from_center_size_angle((0, 0), 4, 2))
        assert (a.x, a.y, a.w, a.h) == (0, 0, 4, 2)

    def test_rotated_unit_square(self):
        a = aabb_of_obb(Obb.from_center_size_angle((0, 0), 1, 1, math.pi / 4))
        assert a.w == pytest.approx(math.sqrt(2))
        assert a.h == pytest.approx(math.sqrt(2))
        assert (a.x, a.y) == (pytest.approx(0), pytest.approx(0))

    @given(obb_strategy)
    def test_contains_all_vertices(self, box):
        a = aabb_of_obb(box)
        eps = 1e-9
        assert np.all(box.vertices[:, 0] >= a.x_min - eps)
        assert np.all(box.vertices[:, 0] <= a.x_max + eps)
        assert np.all(box.vertices[:, 1] >= a.y_min - eps)
        assert np.all(box.vertices[:, 1] <= a.y_max + eps)


class TestAspectRatio:
    def test_four_by_two(self):
        assert obb_aspect_ratio(Obb.from_center_size_angle((0, 0), 4, 2)) == pytest.approx(2.0)

    def test_square(self):
        assert obb_aspect_ratio(Obb.from_center_size_angle((5, 5), 3, 3)) == pytest.approx(1.0)

    def test_invariant_under_similarity(self, rng):
        for _ in range(50):
            box = random_obb(rng)
            t = Similarity2(
                scale=rng.uniform(0.5, 2),
                rotation=rng.uniform(0, TWO_PI),
                translation=rng.uniform(-50, 50, 2),
            )
            assert obb_aspect_ratio(transform_obb(t, box)) == pytest.approx(
                obb_aspect_ratio(box)
            )


class TestReconstruct:
    def test_zero_angle(self):
        box = reconstruct_obb(Aabb(0, 0, 4, 2), 0.0, 2.0)
        assert np.allclose(box.vertices, [[-2, -1], [2, -1], [2, 1], [-2, 1]])

    def test_quarter_turn(self):
        box = reconstruct_obb(Aabb(0, 0, 2, 4), math.pi / 2, 2.0)
        assert box.width == pytest.approx(4)
        assert box.height == pytest.approx(2)
        assert obb_angle(box) == pytest.approx(math.pi / 2)

    def test_rotated_square_round_trip(self):
        g = Obb.from_center_size_angle((0, 0), 2, 2, math.pi / 4)
        rec = reconstruct_obb(aabb_of_obb(g), math.pi / 4, 1.0)
        assert rec.allclose(g, atol=1e-9)

    def test_round_trip_random(self, rng):
        for _ in range(200):
            g = random_obb(rng)
            rec = reconstruct_obb(aabb_of_obb(g), obb_angle(g), obb_aspect_ratio(g))
            assert rec.allclose(g, atol=1e-6)


class TestPolygonIou:
    def test_identical(self):
        box = Obb.from_center_size_angle((3, 4), 5, 2, 0.7)
        assert polygon_iou(box, box) == pytest.approx(1.0)

    def test_disjoint(self):
        a = Obb.from_center_size_angle((0, 0), 1, 1)
        b = Obb.from_center_size_angle((10, 10), 1, 1)
        assert polygon_iou(a, b) == 0.0

    def test_offset_unit_squares(self):
        a = Obb.from_center_size_angle((0, 0), 1, 1)
        b = Obb.from_center_size_angle((0.5, 0), 1, 1)
        assert polygon_iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_symmetric(self, rng):
        for _ in range(100):
            a, b = random_obb(rng), random_obb(rng)
            assert polygon_iou(a, b) == pytest.approx(polygon_iou(b, a), abs=1e-12)

    def test_against_shapely(self, rng):
        for _ in range(200):
            a = random_obb(rng, center_range=30)
            b = random_obb(rng, center_range=30)
            assert polygon_iou(a, b) == pytest.approx(shapely_iou(a, b), abs=1e-9)

    def test_against_monte_carlo(self, rng):
        for _ in range(10):
            a = random_obb(rng, center_range=20)
            b = random_obb(rng, center_range=20)
            mc = monte_carlo_iou(a, b, 200_000, rng)
            assert polygon_iou(a, b) == pytest.approx(mc, abs=0.01)


class TestOrientedIou:
    def test_identical(self):
        box = Obb.from_center_size_angle((0, 0), 4, 2, 1.1)
        assert oriented_iou(box, box) == pytest.approx(1.0)

    def test_flip_is_zero(self):
        gt = Obb.from_center_size_angle((0, 0), 4, 2, 0.3)
        flipped = Obb.from_center_size_angle((0, 0), 4, 2, 0.3 + math.pi)
        assert polygon_iou(flipped, gt) == pytest.approx(1.0)
        assert oriented_iou(flipped, gt) == 0.0

    def test_sixty_degrees_halves(self):
        gt = Obb.from_center_size_angle((0, 0), 4, 4, 0.0)
        pred = Obb.from_center_size_angle((0, 0), 4, 4, math.pi / 3)
        u = polygon_iou(pred, gt)
        assert oriented_iou(pred, gt) == pytest.approx(0.5 * u)

    @given(obb_strategy, obb_strategy)
    @settings(max_examples=50)
    def test_sandwich(self, a, b):
        iou = polygon_iou(a, b)
        oiou = oriented_iou(a, b)
        assert 0.0 <= oiou <= iou + 1e-12
        assert iou <= 1.0 + 1e-12


class TestSimilarity2:
    def test_identity_and_translation(self):
        box = Obb.from_center_size_angle((1, 2), 4, 2, 0.5)
        assert transform_obb(Similarity2.identity(), box).allclose(box, atol=1e-12)
        t = Similarity2(translation=(3, -1))
        assert np.allclose(transform_obb(t, box).vertices, box.vertices + [3, -1])

    def test_scale_rotate(self):
        box = Obb.from_center_size_angle((0, 0), 1, 1, 0.0)
        t = Similarity2(scale=2.0, rotation=math.pi / 2)
        out = transform_obb(t, box)
        assert out.width == pytest.approx(2.0)
        assert obb_angle(out) == pytest.approx(math.pi / 2)

    @given(similarity_strategy, obb_strategy)
    @settings(max_examples=50)
    def test_angle_advances_by_rotation(self, t, box):
        expected = wrap_angle(obb_angle(box) + t.rotation)
        got = obb_angle(transform_obb(t, box))
        assert abs(wrap_angle(got - expected + math.pi) - math.pi) < 1e-9

    @given(similarity_strategy)
    def test_inverse(self, t):
        assert t.compose(t.inverse()).allclose(Similarity2.identity(), atol=1e-9)
        assert t.inverse().compose(t).allclose(Similarity2.identity(), atol=1e-9)

    @given(similarity_strategy, similarity_strategy, similarity_strategy)
    @settings(max_examples=50)
    def test_associative(self, t1, t2, t3):
        left = t1.compose(t2).compose(t3)
        right = t1.compose(t2.compose(t3))
        pts = np.array([[0.0, 0.0], [10.0, -5.0], [-7.0, 3.0]])
        assert np.allclose(left.apply(pts), right.apply(pts), atol=1e-9)

    def test_about_point_fixes_center(self):
        t = Similarity2.about_point((7, -2), scale=1.3, rotation=0.9)
        assert np.allclose(t.apply(np.array([7.0, -2.0])), [7, -2])
