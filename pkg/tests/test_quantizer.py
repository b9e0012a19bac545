"""Digit quantization: affine rescaling, state codes, serialization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdkernel.errors import DegenerateSeriesError, MalformedContextError, OutOfRangeError
from sgdkernel.quantizer import (
    AffineMap,
    TrajectoryQuantizer,
    band_range,
    decode,
    encode,
    fit_affine,
    n_states,
    one_hot,
    parse,
    serialize,
)


class TestFitAffine:
    def test_known_three_point_series(self):
        amap = fit_affine([0.2513, 5.2387, 9.7889])
        assert amap.apply(0.2513) == pytest.approx(1.5, abs=1e-12)
        assert amap.apply(9.7889) == pytest.approx(8.5, abs=1e-12)
        assert amap.apply(5.2387) == pytest.approx(5.16, abs=5e-3)

    def test_unit_interval_gives_identity(self):
        amap = fit_affine([0.0, 1.0], target_lo=0.0, target_hi=1.0)
        assert amap.scale == pytest.approx(1.0)
        assert amap.offset == pytest.approx(0.0)

    def test_midpoint_maps_to_midpoint(self):
        amap = fit_affine([-3.0, 7.0])
        assert amap.apply(2.0) == pytest.approx(5.0, abs=1e-12)

    def test_invert_undoes_apply(self):
        amap = fit_affine([-2.0, 3.0, 11.0])
        x = np.linspace(-2.0, 11.0, 13)
        np.testing.assert_allclose(amap.invert(amap.apply(x)), x, atol=1e-9)

    def test_constant_series_rejected(self):
        with pytest.raises(DegenerateSeriesError):
            fit_affine([4.0, 4.0, 4.0])

    def test_empty_or_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            fit_affine([])
        with pytest.raises(ValueError):
            fit_affine([1.0, np.nan])

    def test_bad_target_interval_rejected(self):
        with pytest.raises(ValueError):
            fit_affine([0.0, 1.0], target_lo=2.0, target_hi=2.0)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50).filter(
        lambda xs: max(xs) > min(xs)))
    def test_extremes_land_on_targets(self, xs):
        amap = fit_affine(xs)
        assert amap.apply(min(xs)) == pytest.approx(1.5, abs=1e-6)
        assert amap.apply(max(xs)) == pytest.approx(8.5, abs=1e-6)
        assert amap.scale > 0


class TestStateCodes:
    def test_zero_state_decodes_to_zero(self):
        assert decode(0, 1) == 0.0

    def test_encode_rounds_half_away_from_zero(self):
        assert encode(1.45, 2) == 15
        assert encode(2.5, 1) == 3
        assert encode(5.16, 3) == 516

    def test_encode_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            encode(9.96, 2)
        with pytest.raises(OutOfRangeError):
            encode(-0.2, 2)

    def test_decode_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            decode(100, 2)
        with pytest.raises(OutOfRangeError):
            decode(-1, 2)

    def test_n_states_and_band(self):
        assert n_states(2) == 100
        assert band_range(2) == (15, 85)
        assert band_range(1) == (2, 8)
        assert band_range(3) == (150, 850)

    def test_one_hot_basis_vector(self):
        vec = one_hot(0, 1)
        np.testing.assert_array_equal(vec, [1, 0, 0, 0, 0, 0, 0, 0, 0, 0])
        assert one_hot(37, 2).argmax() == 37
        with pytest.raises(OutOfRangeError):
            one_hot(10, 1)

    @given(st.integers(1, 4), st.floats(0.0, 9.0))
    def test_round_trip_within_half_bin(self, precision, value):
        width = 10.0 ** (1 - precision)
        assert abs(decode(encode(value, precision), precision) - value) <= width / 2 + 1e-9

    @given(st.integers(1, 3),
           st.floats(0.0, 9.0), st.floats(0.0, 9.0))
    def test_encode_is_monotone(self, precision, x, y):
        if x > y:
            x, y = y, x
        assert encode(x, precision) <= encode(y, precision)


class TestSerialization:
    def test_three_digit_groups(self):
        assert serialize([150, 516, 850], 3) == "150,516,850"

    def test_zero_padding(self):
        assert serialize([5], 3) == "005"

    def test_single_digit_states(self):
        assert serialize([1, 2, 3], 1) == "1,2,3"

    def test_parse_rejects_malformed_groups(self):
        with pytest.raises(MalformedContextError):
            parse("15,1", 2)
        with pytest.raises(MalformedContextError):
            parse("1a", 2)

    def test_parse_empty_string(self):
        assert parse("", 2).shape == (0,)

    def test_serialize_rejects_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            serialize([100], 2)

    @given(st.integers(1, 3), st.lists(st.integers(0, 9), min_size=1, max_size=30))
    def test_parse_inverts_serialize(self, precision, digits):
        states = np.asarray(digits) * (10 ** precision // 10)
        text = serialize(states, precision)
        np.testing.assert_array_equal(parse(text, precision), states)


class TestTrajectoryQuantizer:
    def test_transform_encodes_extremes_onto_band(self, rng):
        X = rng.standard_normal((200, 2)) * [1.0, 5.0]
        quantizer = TrajectoryQuantizer(precision=2).fit(X)
        S = quantizer.transform(X)
        assert S.min() >= 15 and S.max() <= 85
        assert S.dtype == np.int64

    def test_inverse_transform_within_half_bin(self, rng):
        X = rng.uniform(-3.0, 9.0, size=(100, 3))
        quantizer = TrajectoryQuantizer(precision=3).fit(X)
        back = quantizer.inverse_transform(quantizer.transform(X))
        half_bin_raw = 0.05 / min(m.scale for m in quantizer.maps_)
        assert np.max(np.abs(back - X)) <= half_bin_raw + 1e-9

    def test_serialize_per_coordinate(self):
        X = np.array([[0.0, 10.0], [1.0, 20.0], [2.0, 30.0]])
        quantizer = TrajectoryQuantizer(precision=2).fit(X)
        texts = quantizer.serialize(quantizer.transform(X))
        assert texts == ["15,50,85", "15,50,85"]

    def test_constant_coordinate_rejected(self):
        X = np.ones((10, 2))
        X[:, 0] = np.arange(10)
        with pytest.raises(DegenerateSeriesError):
            TrajectoryQuantizer(precision=2).fit(X)

    def test_clip_clamps_outliers(self):
        X = np.linspace(0.0, 1.0, 50)[:, None]
        quantizer = TrajectoryQuantizer(precision=2, clip=True).fit(X)
        S = quantizer.transform(np.array([[-5.0], [6.0]]))
        assert S[0, 0] == 15 and S[1, 0] == 85

    def test_column_count_must_match_fit(self, rng):
        quantizer = TrajectoryQuantizer(precision=2).fit(rng.random((20, 2)))
        with pytest.raises(ValueError):
            quantizer.transform(rng.random((5, 3)))


class TestAffineMapValues:
    def test_apply_and_invert_are_vectorized(self):
        amap = AffineMap(scale=2.0, offset=1.0, source_lo=0.0, source_hi=1.0)
        np.testing.assert_allclose(amap.apply([0.0, 1.0]), [1.0, 3.0])
        np.testing.assert_allclose(amap.invert([1.0, 3.0]), [0.0, 1.0])
