import numpy as np
import pytest

from crowdseg.errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyMask,
    RunSumMismatch,
    TooFewVertices,
)
from crowdseg.masks import (
    BoundingBox,
    PixelMask,
    PolygonOutline,
    RunLengthMask,
    bounding_box,
    boundary_pixels,
    box_iou,
    connected_components,
    decode_rle,
    encode_rle,
    iou,
    majority_reference,
    rasterize_polygon,
)

from conftest import random_mask
from oracles import boundary_bruteforce, point_in_polygon_bruteforce


class TestPixelMask:
    def test_rejects_non_binary_values(self):
        with pytest.raises(ValueError):
            PixelMask(np.array([[0, 2], [1, 0]]))

    def test_from_bits_wrong_length(self):
        with pytest.raises(ValueError):
            PixelMask.from_bits(2, 2, [1, 0, 1])

    def test_bits_round_trip(self):
        m = PixelMask.from_bits(3, 2, [1, 0, 1, 0, 0, 1])
        assert m.bits.tolist() == [1, 0, 1, 0, 0, 1]
        assert m.width == 3 and m.height == 2


class TestRle:
    def test_foreground_first_pixel(self):
        m = PixelMask.from_bits(2, 2, [1, 1, 0, 0])
        assert encode_rle(m).runs == (0, 2, 2)

    def test_all_background(self):
        m = PixelMask.from_bits(2, 2, [0, 0, 0, 0])
        assert encode_rle(m).runs == (4,)

    def test_decode_examples(self):
        assert decode_rle(RunLengthMask(2, 2, (0, 2, 2))).bits.tolist() == [1, 1, 0, 0]
        assert decode_rle(RunLengthMask(2, 2, (4,))).bits.tolist() == [0, 0, 0, 0]

    def test_run_sum_mismatch(self):
        with pytest.raises(RunSumMismatch):
            decode_rle(RunLengthMask(2, 2, (1, 1)))

    def test_zero_mid_run_rejected(self):
        with pytest.raises(ValueError):
            RunLengthMask(2, 2, (2, 0, 2))

    def test_round_trip_random_masks(self, rng):
        for _ in range(1000):
            h = int(rng.integers(1, 12))
            w = int(rng.integers(1, 12))
            m = random_mask(rng, h, w, density=float(rng.random()))
            assert decode_rle(encode_rle(m)) == m


class TestIou:
    def test_identical(self):
        m = PixelMask.from_bits(2, 2, [1, 0, 1, 0])
        assert iou(m, m) == 1.0

    def test_disjoint(self):
        a = PixelMask.from_bits(2, 2, [1, 0, 0, 0])
        b = PixelMask.from_bits(2, 2, [0, 0, 0, 1])
        assert iou(a, b) == 0.0

    def test_quarter_overlap(self):
        a = PixelMask.from_bits(2, 2, [1, 1, 1, 1])
        b = PixelMask.from_bits(2, 2, [1, 0, 0, 0])
        assert iou(a, b) == 0.25

    def test_both_empty(self):
        a = PixelMask.from_bits(2, 2, [0, 0, 0, 0])
        assert iou(a, a) == 1.0

    def test_dimension_mismatch(self):
        a = PixelMask.from_bits(2, 2, [1, 0, 0, 0])
        b = PixelMask.from_bits(2, 1, [1, 0])
        with pytest.raises(DimensionMismatch):
            iou(a, b)

    def test_symmetry_and_monotonicity(self, rng):
        for _ in range(50):
            a = random_mask(rng, 6, 6)
            b = random_mask(rng, 6, 6)
            assert iou(a, b) == iou(b, a)
        # removing a pixel from the intersection only never raises iou
        a = random_mask(rng, 8, 8, nonempty=True)
        b = PixelMask(a.pixels.copy())
        inter = np.argwhere(a.pixels & b.pixels)
        before = iou(a, b)
        shrunk = a.pixels.copy()
        y, x = inter[0]
        shrunk[y, x] = False
        assert iou(PixelMask(shrunk), b) <= before


class TestBoundingBox:
    def test_single_pixel(self):
        m = PixelMask(np.zeros((5, 5), dtype=bool))
        px = m.pixels.copy()
        px[3, 2] = True  # (x=2, y=3)
        assert bounding_box(PixelMask(px)) == BoundingBox(2, 3, 2, 3)

    def test_two_corners(self):
        px = np.zeros((4, 5), dtype=bool)
        px[0, 0] = True
        px[2, 4] = True
        assert bounding_box(PixelMask(px)) == BoundingBox(0, 0, 4, 2)

    def test_empty_mask_raises(self):
        with pytest.raises(EmptyMask):
            bounding_box(PixelMask(np.zeros((3, 3), dtype=bool)))

    def test_box_iou_inclusive_areas(self):
        a = BoundingBox(0, 0, 1, 1)  # 2x2 = 4 pixels
        b = BoundingBox(1, 1, 2, 2)  # overlaps in exactly 1 pixel
        assert box_iou(a, b) == pytest.approx(1 / 7)
        assert box_iou(a, BoundingBox(5, 5, 6, 6)) == 0.0


class TestConnectedComponents:
    def test_single_blob(self):
        m = PixelMask.from_bits(3, 3, [0, 1, 0, 1, 1, 1, 0, 1, 0])
        count, labels = connected_components(m)
        assert count == 1
        assert labels.max() == 1

    def test_diagonal_touch_is_connected(self):
        m = PixelMask.from_bits(2, 2, [1, 0, 0, 1])
        count, _ = connected_components(m)
        assert count == 1

    def test_separated_blobs(self):
        m = PixelMask.from_bits(3, 2, [1, 0, 1, 1, 0, 1])
        count, labels = connected_components(m)
        assert count == 2
        # first-encounter numbering: left blob is 1, right blob is 2
        assert labels[0, 0] == 1 and labels[0, 2] == 2

    def test_translation_invariance(self, rng):
        for _ in range(20):
            m = random_mask(rng, 6, 6, density=0.4)
            count, _ = connected_components(m)
            shifted = np.zeros((9, 9), dtype=bool)
            shifted[2:8, 3:9] = m.pixels
            count_shifted, _ = connected_components(PixelMask(shifted))
            assert count == count_shifted


class TestBoundary:
    def test_single_pixel_is_boundary(self):
        assert boundary_pixels(PixelMask([[1]])) == {(0, 0)}

    def test_full_3x3_border(self):
        m = PixelMask(np.ones((3, 3), dtype=bool))
        assert boundary_pixels(m) == {
            (x, y) for x in range(3) for y in range(3) if x in (0, 2) or y in (0, 2)
        }

    def test_block_inside_larger_grid(self):
        px = np.zeros((8, 8), dtype=bool)
        px[2:6, 2:6] = True
        got = boundary_pixels(PixelMask(px))
        assert len(got) == 12
        expected = {(y, x) for (y, x) in boundary_bruteforce(px)}
        assert got == {(x, y) for (y, x) in expected}

    def test_matches_bruteforce_on_random_masks(self, rng):
        for _ in range(50):
            m = random_mask(rng, 7, 9, density=0.5)
            expected = {(x, y) for (y, x) in boundary_bruteforce(m.pixels)}
            assert boundary_pixels(m) == expected


class TestRasterize:
    def test_square_covers_four_pixel_centres(self):
        poly = PolygonOutline(((0, 0), (2, 0), (2, 2), (0, 2)))
        m = rasterize_polygon(poly, 4, 4)
        assert m.bits.reshape(4, 4).tolist() == [
            [1, 1, 0, 0],
            [1, 1, 0, 0],
            [0, 0, 0, 0],
            [0, 0, 0, 0],
        ]

    def test_tiny_triangle_misses_all_centres(self):
        poly = PolygonOutline(((0.1, 0.1), (0.3, 0.1), (0.2, 0.3)))
        assert rasterize_polygon(poly, 4, 4).is_empty()

    def test_too_few_vertices(self):
        with pytest.raises(TooFewVertices):
            PolygonOutline(((0, 0), (1, 1)))

    def test_star_polygon_matches_point_oracle(self):
        # self-intersecting star exercises the even-odd rule
        verts = ((1.0, 1.0), (9.0, 9.3), (1.0, 9.1), (9.2, 1.0), (5.1, 11.0))
        poly = PolygonOutline(verts)
        m = rasterize_polygon(poly, 12, 12)
        for y in range(12):
            for x in range(12):
                expected = point_in_polygon_bruteforce(x + 0.5, y + 0.5, verts)
                assert bool(m.pixels[y, x]) == expected, (x, y)

    def test_random_convex_polygons_match_point_oracle(self, rng):
        from scipy.spatial import ConvexHull

        for _ in range(25):
            pts = rng.random((8, 2)) * 10 + 0.77  # offsets keep centres off edges
            hull = ConvexHull(pts)
            verts = tuple((float(x), float(y)) for x, y in pts[hull.vertices])
            m = rasterize_polygon(PolygonOutline(verts), 12, 12)
            for y in range(12):
                for x in range(12):
                    expected = point_in_polygon_bruteforce(x + 0.5, y + 0.5, verts)
                    assert bool(m.pixels[y, x]) == expected


class TestMajorityReference:
    def test_unanimous(self):
        m = PixelMask.from_bits(2, 2, [1, 0, 1, 1])
        assert majority_reference([m, m, m]) == m

    def test_two_of_three(self):
        masks = [
            PixelMask.from_bits(2, 1, [1, 0]),
            PixelMask.from_bits(2, 1, [1, 1]),
            PixelMask.from_bits(2, 1, [0, 0]),
        ]
        assert majority_reference(masks).bits.tolist() == [1, 0]

    def test_even_tie_goes_background(self):
        a = PixelMask.from_bits(1, 1, [1])
        b = PixelMask.from_bits(1, 1, [0])
        assert majority_reference([a, a, b, b]).bits.tolist() == [0]

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            majority_reference([])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            majority_reference(
                [PixelMask.from_bits(1, 1, [1]), PixelMask.from_bits(2, 1, [1, 0])]
            )

    def test_odd_copies_identity_and_union_subset(self, rng):
        for _ in range(20):
            m = random_mask(rng, 5, 5)
            assert majority_reference([m] * 5) == m
            others = [random_mask(rng, 5, 5) for _ in range(3)]
            ref = majority_reference(others)
            union = np.zeros((5, 5), dtype=bool)
            for o in others:
                union |= o.pixels
            assert not (ref.pixels & ~union).any()
