import math

import numpy as np
import pytest

from vtforge.geometry import (AABox, FlowField, GeometryError, Homography,
                              Point2, Polygon, aabb, apply_homography, giou,
                              iou_aabb, polygon_area, polygon_iou,
                              sample_flow, transform_polygon)

from conftest import planted_homography, quad


class TestPolygon:
    def test_unit_square_area(self):
        assert polygon_area(quad(0, 0, 1, 1)) == 1.0

    def test_triangle_area_shoelace(self):
        assert polygon_area(Polygon([(0, 0), (4, 0), (0, 3)])) == 6.0

    def test_collinear_rejected(self):
        with pytest.raises(GeometryError):
            Polygon([(0, 0), (1, 1), (2, 2)])

    def test_too_few_vertices(self):
        with pytest.raises(GeometryError):
            Polygon([(0, 0), (1, 1)])

    def test_self_intersection_rejected(self):
        with pytest.raises(GeometryError):
            Polygon([(0, 0), (2, 2), (2, 0), (0, 2)])  # bowtie

    def test_nonfinite_rejected(self):
        with pytest.raises(GeometryError):
            Polygon([(0, 0), (1, 0), (math.nan, 1)])

    def test_ccw_input_normalized_to_cw(self):
        # counter-clockwise in image coords (negative shoelace) is reversed
        p = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
        assert polygon_area(p) == 1.0
        xs = [(v.x, v.y) for v in p.vertices]
        assert xs == [(1, 0), (1, 1), (0, 1), (0, 0)]


class TestAABB:
    def test_unit_square(self):
        assert aabb(quad(0, 0, 1, 1)) == AABox(0, 0, 1, 1)

    def test_rotated_square(self):
        p = Polygon([(1, 0), (2, 1), (1, 2), (0, 1)])
        assert aabb(p) == AABox(0, 0, 2, 2)

    def test_translation_equivariance(self):
        p = quad(3, 4, 5, 6)
        moved = Polygon([(v.x + 7, v.y - 2) for v in p.vertices])
        b, bm = aabb(p), aabb(moved)
        assert (bm.x0, bm.y0, bm.x1, bm.y1) == (b.x0 + 7, b.y0 - 2, b.x1 + 7, b.y1 - 2)

    def test_bad_box_rejected(self):
        with pytest.raises(GeometryError):
            AABox(1, 0, 0, 1)


class TestBoxIoU:
    def test_identity(self):
        b = AABox(0, 0, 2, 2)
        assert iou_aabb(b, b) == 1.0

    def test_hand_computed(self):
        assert iou_aabb(AABox(0, 0, 2, 2), AABox(1, 1, 3, 3)) == pytest.approx(1 / 7)

    def test_disjoint(self):
        assert iou_aabb(AABox(0, 0, 1, 1), AABox(5, 5, 6, 6)) == 0.0

    def test_both_degenerate_errors(self):
        with pytest.raises(GeometryError):
            iou_aabb(AABox(0, 0, 0, 1), AABox(2, 2, 2, 3))


class TestGIoU:
    def test_identity(self):
        b = AABox(0, 0, 2, 2)
        assert giou(b, b) == 1.0

    def test_hand_computed_overlap(self):
        value = giou(AABox(0, 0, 2, 2), AABox(1, 1, 3, 3))
        assert value == pytest.approx(-5 / 63, abs=1e-12)

    def test_hand_computed_disjoint(self):
        value = giou(AABox(0, 0, 1, 1), AABox(10, 0, 11, 1))
        assert value == pytest.approx(-9 / 11, abs=1e-12)

    def test_degenerate_errors(self):
        with pytest.raises(GeometryError):
            giou(AABox(0, 0, 0, 1), AABox(0, 0, 1, 1))

    def test_bounded_below_iou_and_symmetric(self, rng):
        for _ in range(300):
            x0, y0 = rng.uniform(0, 40, 2)
            w, h = rng.uniform(0.5, 30, 2)
            a = AABox(x0, y0, x0 + w, y0 + h)
            x0, y0 = rng.uniform(0, 40, 2)
            w, h = rng.uniform(0.5, 30, 2)
            b = AABox(x0, y0, x0 + w, y0 + h)
            assert giou(a, b) <= iou_aabb(a, b) + 1e-12
            assert giou(a, b) == pytest.approx(giou(b, a))
            assert iou_aabb(a, b) == pytest.approx(iou_aabb(b, a))


class TestPolygonIoU:
    def test_identical(self):
        p = quad(2, 3, 4, 5)
        assert polygon_iou(p, p) == 1.0

    def test_half_shift(self):
        a = quad(0, 0, 1, 1)
        b = quad(0.5, 0, 1, 1)
        assert polygon_iou(a, b) == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert polygon_iou(quad(0, 0, 1, 1), quad(5, 5, 1, 1)) == 0.0

    def test_nonconvex_falls_back_to_raster(self):
        arrow = Polygon([(0, 0), (40, 0), (40, 40), (20, 12), (0, 40)])
        assert not arrow.is_convex()
        assert polygon_iou(arrow, arrow) == 1.0
        box = quad(0, 0, 40, 40)
        value = polygon_iou(arrow, box)
        assert 0.0 < value < 1.0

    def test_clip_agrees_with_raster_for_big_quads(self, rng):
        # random convex quads with diameter >= 20 px
        for _ in range(60):
            pts = rng.uniform(0, 80, (4, 2))
            c = pts.mean(axis=0)
            order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
            pts = pts[order]
            if np.hypot(*(pts.max(0) - pts.min(0))) < 20:
                continue
            try:
                a = Polygon(pts)
                b = Polygon(pts + rng.uniform(-10, 10, 2))
            except GeometryError:
                continue
            exact = polygon_iou(a, b)
            from vtforge.geometry import _raster_iou
            assert abs(exact - _raster_iou(a, b)) < 0.02


class TestHomography:
    def test_identity_point(self):
        h = Homography.identity()
        p = Point2(3.7, -2.4)
        assert apply_homography(h, p) == p

    def test_translation(self):
        h = Homography.translation(3, -2)
        assert apply_homography(h, Point2(1, 1)) == Point2(4, -1)

    def test_planted_matrix_matches_direct_arithmetic(self):
        m = np.array([[1.2, 0.1, 5.0], [-0.2, 0.9, -3.0], [1e-4, -2e-4, 1.0]])
        h = Homography(m)
        for x, y in [(0, 0), (1, 0), (1, 1), (0, 1)]:
            w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
            expect = ((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
                      (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w)
            got = apply_homography(h, Point2(x, y))
            assert (got.x, got.y) == pytest.approx(expect, abs=1e-12)

    def test_scale_normalization(self):
        h = Homography(np.eye(3) * 7.0)
        assert np.allclose(h.matrix, np.eye(3))

    def test_frobenius_fallback(self):
        m = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        h = Homography(m)  # bottom-right is 0
        assert abs(np.linalg.norm(h.matrix) - 1.0) < 1e-12

    def test_singular_rejected(self):
        with pytest.raises(GeometryError):
            Homography(np.ones((3, 3)))

    def test_inverse_round_trip(self, rng):
        for _ in range(50):
            h = planted_homography(rng)
            inv = h.inverse()
            for _ in range(5):
                p = Point2(*rng.uniform(-50, 50, 2))
                q = apply_homography(inv, apply_homography(h, p))
                assert math.hypot(q.x - p.x, q.y - p.y) < 1e-9

    def test_collinearity_preserved(self, rng):
        for _ in range(100):
            h = planted_homography(rng)
            a = np.array(rng.uniform(0, 100, 2))
            d = np.array(rng.uniform(-1, 1, 2))
            pts = [a, a + 13 * d, a + 29 * d]
            imgs = [apply_homography(h, Point2(*p)) for p in pts]
            (x1, y1), (x2, y2), (x3, y3) = [(p.x, p.y) for p in imgs]
            area = abs((x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)) / 2
            span = max(abs(x2 - x1), abs(y2 - y1), abs(x3 - x1), abs(y3 - y1), 1.0)
            assert area < 1e-6 * span * span

    def test_point_at_infinity_errors(self):
        h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, 0, 1.0]]))
        with pytest.raises(GeometryError):
            apply_homography(h, Point2(1.0, 0.0))

    def test_transform_polygon(self):
        h = Homography.translation(5, 7)
        p = transform_polygon(h, quad(0, 0, 2, 2))
        assert aabb(p) == AABox(5, 7, 7, 9)


class TestFlowField:
    def test_grid_identity(self):
        u = np.arange(12, dtype=np.float32).reshape(3, 4)
        v = -u
        f = FlowField(u, v)
        assert sample_flow(f, Point2(2, 1)) == (6.0, -6.0)

    def test_linear_field_exact(self):
        gy, gx = np.mgrid[0:10, 0:10].astype(np.float64)
        f = FlowField(gx.astype(np.float32), np.zeros((10, 10), np.float32))
        du, dv = sample_flow(f, Point2(2.5, 7.3))
        assert du == pytest.approx(2.5, abs=1e-6)
        assert dv == 0.0

    def test_out_of_bounds(self):
        f = FlowField.zeros(4, 4)
        with pytest.raises(GeometryError):
            sample_flow(f, Point2(-1, 0))
        with pytest.raises(GeometryError):
            sample_flow(f, Point2(0, 3.5))

    def test_affine_field_reproduced_everywhere(self, rng):
        gy, gx = np.mgrid[0:15, 0:25].astype(np.float64)
        u = 0.3 * gx + 0.2 * gy - 4.0
        v = -0.6 * gx + 0.05 * gy + 2.0
        f = FlowField(u.astype(np.float32), v.astype(np.float32))
        # float32 storage still reproduces the affine field to float32 eps
        for _ in range(200):
            x = float(rng.uniform(0, 24))
            y = float(rng.uniform(0, 14))
            du, dv = sample_flow(f, Point2(x, y))
            assert du == pytest.approx(0.3 * x + 0.2 * y - 4.0, abs=1e-4)
            assert dv == pytest.approx(-0.6 * x + 0.05 * y + 2.0, abs=1e-4)

    def test_shape_mismatch(self):
        with pytest.raises(GeometryError):
            FlowField(np.zeros((2, 3)), np.zeros((3, 2)))
