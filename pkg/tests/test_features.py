"""Census descriptors and feature pyramids."""
import numpy as np
import pytest

from densematch import CENSUS_BITS, ScalarImage, build_pyramid, census_transform, match_cost

FULL = np.uint64((1 << CENSUS_BITS) - 1)


class TestCensus:
    def test_constant_image_has_zero_signatures(self):
        desc = census_transform(np.full((12, 12), 7.0))
        assert (desc == 0).all()

    def test_step_edge_bits(self):
        # Step at column 8: comparisons pointing across the edge flip
        # depending on which side the anchor sits.
        img = np.zeros((16, 16))
        img[:, 8:] = 10.0
        desc = census_transform(img)
        left = desc[8, 7]   # anchor dark, right neighbors brighter
        right = desc[8, 8]  # anchor bright, nothing brighter anywhere
        assert left != 0
        assert right == 0
        # the (dy=0, dx=+1) comparison is set on the left side only
        bit_right_neighbor = [(dy, dx) for dy in range(-3, 5) for dx in range(-3, 5) if (dy, dx) != (0, 0)].index((0, 1))
        assert (int(left) >> bit_right_neighbor) & 1 == 1
        assert (int(right) >> bit_right_neighbor) & 1 == 0

    def test_monotonic_rescale_invariance(self):
        rng = np.random.default_rng(42)
        img = rng.uniform(0.1, 1.0, (20, 20))
        base = census_transform(img)
        for gamma in (0.4, 1.0, 2.5):
            np.testing.assert_array_equal(census_transform(img**gamma), base)
        np.testing.assert_array_equal(census_transform(3.0 * img + 5.0), base)

    def test_signatures_fit_in_63_bits(self):
        rng = np.random.default_rng(1)
        desc = census_transform(rng.uniform(0, 1, (16, 16)))
        assert (desc <= FULL).all()


class TestMatchCost:
    def test_equal_descriptors_cost_zero(self):
        rng = np.random.default_rng(2)
        d = census_transform(rng.uniform(0, 1, (8, 8)))
        np.testing.assert_array_equal(match_cost(d, d), 0.0)

    def test_complementary_vectors_cost_one(self):
        a = np.uint64(0)
        b = FULL
        assert match_cost(a, b) == 1.0

    def test_third_of_bits_differ(self):
        a = np.uint64(0)
        b = np.uint64((1 << 21) - 1)  # 21 of 63 bits set
        assert match_cost(a, b) == pytest.approx(1.0 / 3.0)

    def test_symmetry_and_identity(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 1 << 63, size=100, dtype=np.uint64)
        b = rng.integers(0, 1 << 63, size=100, dtype=np.uint64)
        np.testing.assert_array_equal(match_cost(a, b), match_cost(b, a))
        assert (match_cost(a, a) == 0.0).all()
        distinct = a != b
        assert (match_cost(a, b)[distinct] > 0).all()

    def test_invalid_positions_cost_max(self):
        a = np.zeros(4, dtype=np.uint64)
        valid = np.array([True, False, True, False])
        np.testing.assert_array_equal(match_cost(a, a, valid=valid), [0.0, 1.0, 0.0, 1.0])


class TestPyramid:
    def test_level_geometry(self):
        rng = np.random.default_rng(4)
        pyr = build_pyramid(ScalarImage(rng.uniform(0, 255, (64, 64))), 3)
        assert [d.shape for d in pyr.descriptors] == [(16, 16), (32, 32), (64, 64)]
        assert pyr.num_levels == 3

    def test_constant_image_all_levels_zero(self):
        pyr = build_pyramid(ScalarImage(np.full((32, 32), 3.0)), 2)
        for desc in pyr.descriptors:
            assert (desc == 0).all()

    def test_too_small_image_raises(self):
        with pytest.raises(ValueError, match="too small"):
            build_pyramid(ScalarImage(np.zeros((16, 16))), 4)

    def test_indivisible_size_raises(self):
        with pytest.raises(ValueError, match="divisible"):
            build_pyramid(ScalarImage(np.zeros((34, 34))), 3)

    def test_color_images_accepted(self):
        rng = np.random.default_rng(5)
        pyr = build_pyramid(ScalarImage(rng.uniform(0, 255, (16, 16, 3))), 1)
        assert pyr.level(0).shape == (16, 16)
