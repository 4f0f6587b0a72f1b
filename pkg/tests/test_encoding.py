import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loopkit.encoding import (
    AngleQuantizer,
    CatalogEntry,
    EncodingError,
    ObjectCatalog,
    OrientedLabel,
    UnknownClass,
    UnorientedLabel,
    decode_prediction,
    encode_label,
    o2u_class,
    quantize_angle,
    u2o_class,
)
from loopkit.geometry import Aabb, Obb, obb_angle, wrap_angle

TWO_PI = 2.0 * math.pi


def small_catalog():
    return ObjectCatalog(
        (
            CatalogEntry(0, "slab", 2.0),
            CatalogEntry(1, "tile", 1.0, symmetric=True),
            CatalogEntry(2, "bar", 3.0),
        )
    )


class TestAngleQuantizer:
    def test_ten_degree_step_gives_36_bins(self):
        assert AngleQuantizer.from_degrees(10.0).k == 36

    def test_known_bin_counts(self):
        for deg, k in [(5, 72), (10, 36), (20, 18), (30, 12), (45, 8), (90, 4)]:
            assert AngleQuantizer.from_degrees(deg).k == k

    def test_non_divisor_rounds_up(self):
        # 360/7 deg per bin would be exact; 50 deg is not: 360/50 = 7.2 -> 8
        assert AngleQuantizer.from_degrees(50.0).k == 8

    def test_invalid_step(self):
        with pytest.raises(EncodingError):
            AngleQuantizer(0.0)
        with pytest.raises(EncodingError):
            AngleQuantizer(-1.0)
        with pytest.raises(EncodingError):
            AngleQuantizer(TWO_PI + 0.1)


class TestQuantizeAngle:
    def test_examples(self):
        q = AngleQuantizer.from_degrees(10.0)
        assert quantize_angle(q, 0.0) == 0
        assert quantize_angle(q, math.radians(4.9)) == 0
        assert quantize_angle(q, math.radians(5.0)) == 1  # half rounds up
        assert quantize_angle(q, math.radians(45.0)) == 5
        assert quantize_angle(q, math.radians(355.1)) == 0  # wraps

    def test_all_bin_centers_exact(self):
        for deg in (5.0, 10.0, 20.0, 30.0, 45.0):
            q = AngleQuantizer.from_degrees(deg)
            for b in range(q.k):
                assert quantize_angle(q, b * q.theta_hat) == b

    @given(st.floats(0.0, TWO_PI, exclude_max=True))
    def test_error_bounded_by_half_step(self, theta):
        q = AngleQuantizer.from_degrees(10.0)
        b = quantize_angle(q, theta)
        err = abs(wrap_angle(theta - b * q.theta_hat + math.pi) - math.pi)
        assert err <= q.theta_hat / 2 + 1e-9


class TestClassExpansion:
    def test_expand_and_split(self):
        q = AngleQuantizer.from_degrees(10.0)
        assert o2u_class(q, 0, 0.0) == 0
        assert o2u_class(q, 1, math.radians(45.0)) == 41
        assert o2u_class(q, 2, math.radians(350.0)) == 2 * 36 + 35
        cid, theta = u2o_class(q, 41)
        assert cid == 1
        assert theta == pytest.approx(math.radians(50.0))

    def test_round_trip_exhaustive(self):
        for deg in (5.0, 10.0, 20.0, 30.0, 45.0):
            q = AngleQuantizer.from_degrees(deg)
            for c in range(12):
                for b in range(q.k):
                    theta = b * q.theta_hat
                    expanded = o2u_class(q, c, theta)
                    c2, theta2 = u2o_class(q, expanded)
                    assert c2 == c
                    assert quantize_angle(q, theta2) == b

    def test_negative_inputs(self):
        q = AngleQuantizer.from_degrees(10.0)
        with pytest.raises(EncodingError):
            o2u_class(q, -1, 0.0)
        with pytest.raises(EncodingError):
            u2o_class(q, -1)


class TestCatalog:
    def test_requires_contiguous_ids(self):
        with pytest.raises(EncodingError):
            ObjectCatalog((CatalogEntry(0, "a", 1.0), CatalogEntry(2, "b", 1.0)))

    def test_rejects_bad_ratio(self):
        with pytest.raises(EncodingError):
            CatalogEntry(0, "a", 0.0)

    def test_groups_in_first_seen_order(self):
        cat = ObjectCatalog(
            (
                CatalogEntry(0, "a", 1.0, group="g2"),
                CatalogEntry(1, "b", 1.0, group="g1"),
                CatalogEntry(2, "c", 1.0, group="g2"),
            )
        )
        assert cat.groups == ["g2", "g1"]

    def test_json_round_trip(self, tmp_path):
        cat = small_catalog()
        p = tmp_path / "catalog.json"
        cat.save(p)
        assert ObjectCatalog.load(p) == cat
        # file is plain JSON with the documented keys
        obj = json.loads(p.read_text())
        assert set(obj[0]) == {"id", "name", "ratio", "symmetric", "group"}


class TestLabels:
    def test_oriented_label_checks_theta(self):
        box = Obb.from_center_size_angle((0, 0), 4, 2, 0.5)
        OrientedLabel(obb=box, class_id=0, theta=obb_angle(box))
        with pytest.raises(EncodingError):
            OrientedLabel(obb=box, class_id=0, theta=0.6)

    def test_unoriented_label_validation(self):
        with pytest.raises(EncodingError):
            UnorientedLabel(Aabb(0, 0, 1, 1), expanded_class=-1)
        with pytest.raises(EncodingError):
            UnorientedLabel(Aabb(0, 0, 1, 1), expanded_class=0, confidence=1.5)


class TestCodecEndToEnd:
    def test_encode_decode_recovers_pose(self):
        q = AngleQuantizer.from_degrees(10.0)
        cat = small_catalog()
        for c in range(len(cat)):
            ratio = cat[c].nominal_ratio
            for b in range(q.k):
                theta = b * q.theta_hat
                box = Obb.from_center_size_angle((50, 40), 4 * ratio, 4.0, theta)
                gt = OrientedLabel.from_obb(box, class_id=c)
                pred = encode_label(q, gt)
                assert pred.expanded_class == c * q.k + b
                dec = decode_prediction(q, cat, pred)
                assert dec.class_id == c
                assert dec.obb.allclose(box, atol=1e-6)

    def test_decode_unknown_class(self):
        q = AngleQuantizer.from_degrees(10.0)
        cat = small_catalog()
        with pytest.raises(UnknownClass):
            decode_prediction(
                q, cat, UnorientedLabel(Aabb(0, 0, 4, 2), expanded_class=3 * q.k)
            )

    def test_confidence_passes_through(self):
        q = AngleQuantizer.from_degrees(10.0)
        cat = small_catalog()
        box = Obb.from_center_size_angle((0, 0), 4, 2, 0.0)
        gt = OrientedLabel.from_obb(box, class_id=0, confidence=0.25)
        pred = encode_label(q, gt)
        assert pred.confidence == 0.25
        assert decode_prediction(q, cat, pred).confidence == 0.25
