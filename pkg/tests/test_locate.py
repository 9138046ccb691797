import numpy as np
import pytest

from ofdmpcl import (
    AmbiguousFix,
    BistaticMeasurement,
    BistaticPair,
    DegenerateEllipse,
    Detection,
    NegativeExcess,
    Numerology,
    SPEED_OF_LIGHT,
    ellipse_points,
    fuse_position,
    measurement_from_detection,
)

NUM = Numerology(num_carriers=80, symbols_per_frame=28)  # bin width 1/1.2 MHz


def pair_at(tx, rx, tx_id="tx", rx_id="rx"):
    return BistaticPair(tx_id, rx_id, np.array(tx, float), np.array(rx, float))


def detection(excess_delay_s, doppler_hz=0.0):
    return Detection(
        delay_bin=0,
        doppler_bin=0,
        refined_delay_s=excess_delay_s,
        refined_doppler_hz=doppler_hz,
        peak_power=1.0,
        snr_db=20.0,
    )


def exact_measurement(pair, target, sigma_m=1.0):
    target = np.asarray(target, float)
    total = np.linalg.norm(target - pair.tx_position) + np.linalg.norm(
        pair.rx_position - target
    )
    return BistaticMeasurement(
        pair=pair, total_range_m=total, doppler_hz=0.0, variance_m2=sigma_m**2
    )


def test_measurement_from_excess_delay():
    pair = pair_at((0, 0), (100, 0))
    meas = measurement_from_detection(detection(138.17e-9, doppler_hz=50.0), pair, NUM)
    assert meas.total_range_m == pytest.approx(141.42, abs=0.01)
    assert meas.doppler_hz == 50.0


def test_zero_excess_gives_baseline_range():
    pair = pair_at((0, 0), (100, 0))
    meas = measurement_from_detection(detection(0.0), pair, NUM)
    assert meas.total_range_m == pair.baseline_m


def test_negative_excess_rejected():
    pair = pair_at((0, 0), (100, 0))
    with pytest.raises(NegativeExcess):
        measurement_from_detection(detection(-1e-9), pair, NUM)


def test_variance_follows_uniform_bin_model():
    num = Numerology(num_carriers=5328, symbols_per_frame=140)  # 12.51 ns bins
    pair = pair_at((0, 0), (100, 0))
    meas = measurement_from_detection(detection(100e-9), pair, num)
    sigma = SPEED_OF_LIGHT * num.delay_bin_s / np.sqrt(12)
    assert meas.variance_m2 == pytest.approx(sigma**2, rel=1e-12)
    # for an exactly 12.5 ns bin the sigma is 1.082 m
    assert SPEED_OF_LIGHT * 12.5e-9 / np.sqrt(12) == pytest.approx(1.082, abs=1e-3)


def test_ellipse_points_satisfy_focal_sum():
    pair = pair_at((0, 0), (100, 0))
    meas = BistaticMeasurement(pair, total_range_m=200.0, doppler_hz=0.0, variance_m2=1.0)
    points = ellipse_points(meas, 64)
    assert points.shape == (64, 2)
    sums = np.linalg.norm(points - pair.tx_position, axis=1) + np.linalg.norm(
        points - pair.rx_position, axis=1
    )
    np.testing.assert_allclose(sums, 200.0, atol=1e-9 * 200.0)


def test_known_point_lies_on_its_ellipse():
    pair = pair_at((0, 0), (100, 0))
    target = np.array([50.0, 50.0])
    meas = exact_measurement(pair, target)
    focal = np.linalg.norm(target - pair.tx_position) + np.linalg.norm(
        pair.rx_position - target
    )
    assert abs(focal - meas.total_range_m) < 1e-6
    # the generated polyline passes near the target point
    points = ellipse_points(meas, 4096)
    assert np.linalg.norm(points - target, axis=1).min() < 0.2


def test_ellipse_start_point_is_vertex_nearest_tx():
    pair = pair_at((0, 0), (100, 0))
    meas = BistaticMeasurement(pair, total_range_m=140.0, doppler_hz=0.0, variance_m2=1.0)
    points = ellipse_points(meas, 4)
    assert len(points) == 4
    # center (50, 0), semi-major 70, Tx-side vertex at (-20, 0)
    np.testing.assert_allclose(points[0], [-20.0, 0.0], atol=1e-9)


def test_degenerate_ellipse_rejected():
    pair = pair_at((0, 0), (100, 0))
    meas = measurement_from_detection(detection(0.0), pair, NUM)
    with pytest.raises(DegenerateEllipse):
        ellipse_points(meas, 16)


def test_two_exact_pairs_recover_target():
    target = (50.0, 50.0)
    pairs = [
        pair_at((0, 0), (100, 0), "a", "b"),
        pair_at((0, 100), (100, 100), "c", "d"),
    ]
    estimate = fuse_position([exact_measurement(p, target) for p in pairs])
    assert np.linalg.norm(estimate.position - target) < 1e-6
    assert estimate.pairs_used == 2
    assert estimate.residual_rms_m < 1e-9


def test_single_measurement_is_an_error():
    meas = exact_measurement(pair_at((0, 0), (100, 0)), (50, 50))
    with pytest.raises(ValueError):
        fuse_position([meas])


def test_two_intersecting_ellipses_raise_ambiguous_fix():
    target = (60.0, 40.0)
    pairs = [
        pair_at((0, 0), (100, 0), "a", "b"),
        pair_at((0, 0), (0, 100), "a", "c"),
    ]
    measurements = [exact_measurement(p, target) for p in pairs]
    with pytest.raises(AmbiguousFix) as excinfo:
        fuse_position(measurements)
    candidates = excinfo.value.estimates
    assert len(candidates) == 2
    assert candidates[0].residual_rms_m <= candidates[1].residual_rms_m
    # both candidates lie on both ellipses; one of them is the true target
    for est in candidates:
        for meas in measurements:
            focal = np.linalg.norm(est.position - meas.pair.tx_position) + np.linalg.norm(
                meas.pair.rx_position - est.position
            )
            assert focal == pytest.approx(meas.total_range_m, abs=1e-6)
    best_match = min(
        np.linalg.norm(est.position - np.array(target)) for est in candidates
    )
    assert best_match < 1e-6


def test_explicit_init_skips_grid_search():
    target = (60.0, 40.0)
    pairs = [
        pair_at((0, 0), (100, 0), "a", "b"),
        pair_at((0, 0), (0, 100), "a", "c"),
    ]
    measurements = [exact_measurement(p, target) for p in pairs]
    estimate = fuse_position(measurements, init=(55.0, 45.0))
    assert np.linalg.norm(estimate.position - target) < 1e-6


def test_monte_carlo_error_consistent_with_covariance():
    rng = np.random.default_rng(314159)
    target = np.array([70.0, 90.0])
    pairs = [
        pair_at((0, 0), (200, 0), "a", "b"),
        pair_at((200, 0), (200, 200), "c", "d"),
        pair_at((200, 200), (0, 200), "e", "f"),
        pair_at((0, 200), (0, 0), "g", "h"),
    ]
    errors = []
    predicted = []
    for _ in range(100):
        measurements = []
        for p in pairs:
            m = exact_measurement(p, target, sigma_m=1.0)
            m.total_range_m += rng.normal(0.0, 1.0)
            measurements.append(m)
        est = fuse_position(measurements)
        errors.append(np.sum((est.position - target) ** 2))
        predicted.append(np.trace(est.covariance))
    rms_empirical = np.sqrt(np.mean(errors))
    rms_predicted = np.sqrt(np.mean(predicted))
    assert 0.5 < rms_empirical / rms_predicted < 2.0


def test_rigid_transform_equivariance():
    target = np.array([55.0, 35.0])
    pairs = [
        pair_at((0, 0), (100, 0), "a", "b"),
        pair_at((0, 100), (100, 100), "c", "d"),
        pair_at((-50, 50), (120, 65), "e", "f"),
    ]
    measurements = [exact_measurement(p, target) for p in pairs]
    base = fuse_position(measurements)

    angle = 0.7
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    shift = np.array([312.0, -88.0])
    moved = [
        BistaticMeasurement(
            pair=BistaticPair(
                m.pair.tx_id,
                m.pair.rx_id,
                rot @ m.pair.tx_position + shift,
                rot @ m.pair.rx_position + shift,
            ),
            total_range_m=m.total_range_m,
            doppler_hz=m.doppler_hz,
            variance_m2=m.variance_m2,
        )
        for m in measurements
    ]
    transformed = fuse_position(moved)
    expected = rot @ base.position + shift
    assert np.linalg.norm(transformed.position - expected) < 1e-9


def test_estimate_residual_not_worse_than_grid_initializer():
    from ofdmpcl.locate import _grid_candidates, _residuals

    rng = np.random.default_rng(8)
    target = np.array([70.0, 90.0])
    pairs = [
        pair_at((0, 0), (200, 0), "a", "b"),
        pair_at((200, 0), (200, 200), "c", "d"),
        pair_at((0, 200), (0, 0), "g", "h"),
    ]
    measurements = []
    for p in pairs:
        m = exact_measurement(p, target, sigma_m=2.0)
        m.total_range_m += rng.normal(0.0, 2.0)
        measurements.append(m)
    estimate = fuse_position(measurements)
    candidates, _ = _grid_candidates(measurements)
    grid_rms = np.sqrt(np.mean(_residuals(candidates[0], measurements) ** 2))
    assert estimate.residual_rms_m <= grid_rms + 1e-12
