import numpy as np
import pytest

from ofdmpcl import (
    CfarConfig,
    MapTooSmall,
    NotchTooWide,
    Numerology,
    Path,
    apply_channel,
    build_grid,
    cfar_detect,
    delay_transform,
    doppler_transform,
    estimate_channel,
    full_allocation,
    scattering_map,
    suppress_clutter,
)
from ofdmpcl.dsp import ScatteringMap

# 100 Hz Doppler bins: 140 symbols at 1/14 ms each
NUM = Numerology(num_carriers=60, symbols_per_frame=140)


def pipeline_map(paths, num=NUM, snr_db=None, seed=0, grid_seed=1):
    grid = build_grid(num, full_allocation(num), rng_seed=grid_seed)
    frame = apply_channel(grid, paths, noise_snr_db=snr_db, rng_seed=seed)
    return scattering_map(
        doppler_transform(delay_transform(estimate_channel(frame, grid)))
    )


def synthetic_map(power):
    return ScatteringMap(power=power, delay_bin_s=1e-8, doppler_bin_hz=100.0)


def test_static_only_scene_notches_to_zero():
    paths = [
        Path(0.0, 0.0, 2.0 + 0j, "los"),
        Path(1.5 * NUM.delay_bin_s, 0.0, 0.5 + 0.2j, "clutter"),
        Path(3.2 * NUM.delay_bin_s, 0.0, 0.3 - 0.4j, "clutter"),
    ]
    smap = pipeline_map(paths)
    notched = suppress_clutter(smap, notch_half_width=1)
    assert notched.power.max() < 1e-18 * smap.power.max()


def test_notch_preserves_target_two_bins_out():
    # 100 Hz bins; a 200 Hz target sits 2 bins from the +-1 bin notch
    target = Path(2 * NUM.delay_bin_s, 200.0, 1.0, "target")
    clutter = Path(1 * NUM.delay_bin_s, 0.0, 3.0, "clutter")
    smap = pipeline_map([target, clutter])
    notched = suppress_clutter(smap, notch_half_width=1)
    center = smap.zero_doppler_bin
    assert notched.power[2, center + 2] == smap.power[2, center + 2]
    assert notched.power[:, center - 1 : center + 2].sum() == 0.0
    detections = cfar_detect(notched, CfarConfig(train_cells=6, guard_cells=2, pfa=1e-6))
    assert detections[0].delay_bin == 2
    assert detections[0].doppler_bin == center + 2


def test_zero_width_notch_removes_only_the_center_column():
    target = Path(2 * NUM.delay_bin_s, 200.0, 1.0, "target")
    smap = pipeline_map([target])
    notched = suppress_clutter(smap, notch_half_width=0)
    center = smap.zero_doppler_bin
    assert notched.power[:, center].sum() == 0.0
    others = np.delete(np.arange(smap.power.shape[1]), center)
    np.testing.assert_array_equal(notched.power[:, others], smap.power[:, others])


def test_notch_wider_than_half_the_axis_rejected():
    smap = synthetic_map(np.ones((64, 32)))
    with pytest.raises(NotchTooWide):
        suppress_clutter(smap, notch_half_width=8)  # 17 of 32 columns
    suppress_clutter(smap, notch_half_width=7)  # 15 of 32 is allowed


def test_single_target_20db_yields_exactly_one_detection_at_true_bins():
    # per-element SNR set so the map-domain target SNR is about 20 dB
    processing_gain_db = 10 * np.log10(NUM.num_carriers * NUM.symbols_per_frame)
    target = Path(3 * NUM.delay_bin_s, 400.0, 1.0, "target")
    smap = pipeline_map([target], snr_db=20.0 - processing_gain_db, seed=3)
    notched = suppress_clutter(smap, notch_half_width=1)
    detections = cfar_detect(notched, CfarConfig(train_cells=6, guard_cells=2, pfa=1e-6))
    assert len(detections) == 1
    det = detections[0]
    assert (det.delay_bin, det.doppler_bin) == (3, smap.zero_doppler_bin + 4)
    assert det.snr_db == pytest.approx(20.0, abs=3.0)


def test_all_zero_map_has_no_detections():
    detections = cfar_detect(synthetic_map(np.zeros((64, 64))), CfarConfig())
    assert detections == []


def test_detection_set_is_scale_invariant():
    rng = np.random.default_rng(21)
    power = rng.exponential(size=(128, 128))
    power[40, 40] = 500.0
    power[90, 17] = 120.0
    cfg = CfarConfig(train_cells=8, guard_cells=2, pfa=1e-3)
    reference = {(d.delay_bin, d.doppler_bin) for d in cfar_detect(synthetic_map(power), cfg)}
    assert (40, 40) in reference and (90, 17) in reference
    for scale in (2.0**-12, 3.7, 2.0**20):
        scaled = {
            (d.delay_bin, d.doppler_bin)
            for d in cfar_detect(synthetic_map(power * scale), cfg)
        }
        assert scaled == reference


def test_lowering_pfa_never_adds_detections():
    rng = np.random.default_rng(77)
    power = rng.exponential(size=(128, 128))
    power[30, 64] = 200.0
    previous = None
    for pfa in (1e-2, 1e-3, 1e-4, 1e-5):
        cfg = CfarConfig(train_cells=8, guard_cells=2, pfa=pfa)
        bins = {(d.delay_bin, d.doppler_bin) for d in cfar_detect(synthetic_map(power), cfg)}
        if previous is not None:
            assert bins <= previous
        previous = bins


def test_false_alarm_rate_on_pure_noise():
    rng = np.random.default_rng(1010)
    power = rng.exponential(size=(256, 256))
    cfg = CfarConfig(train_cells=8, guard_cells=2, pfa=1e-3)
    detections = cfar_detect(synthetic_map(power), cfg)
    rate = len(detections) / power.size
    assert 0.5e-3 <= rate <= 2e-3


def test_map_smaller_than_window_rejected():
    cfg = CfarConfig(train_cells=8, guard_cells=2, pfa=1e-3)  # 21-cell window
    with pytest.raises(MapTooSmall):
        cfar_detect(synthetic_map(np.ones((21, 64))), cfg)
    with pytest.raises(MapTooSmall):
        cfar_detect(synthetic_map(np.ones((64, 21))), cfg)


def test_refinement_beats_bin_center_for_off_grid_targets():
    num = Numerology(num_carriers=60, symbols_per_frame=28, cp_fraction=0.25)
    cfg = CfarConfig(train_cells=4, guard_cells=2, pfa=1e-4)
    for offset in (0.05, 0.15, 0.25, 0.35, 0.45):
        true_delay_bins = 8.0 + offset
        target = Path(
            true_delay_bins * num.delay_bin_s,
            2.0 / (num.symbols_per_frame * num.symbol_duration_s),
            1.0,
            "target",
        )
        smap = pipeline_map([target], num=num)
        det = cfar_detect(smap, cfg)[0]
        refined_bins = det.refined_delay_s / num.delay_bin_s
        raw_error = abs(det.delay_bin - true_delay_bins)
        assert abs(refined_bins - true_delay_bins) < raw_error


def test_detections_sorted_by_power_then_lexicographic():
    power = np.zeros((64, 64))
    power[50, 9] = 5.0
    power[10, 30] = 5.0  # equal power, lower delay bin: must come first
    power[20, 20] = 9.0
    cfg = CfarConfig(train_cells=4, guard_cells=1, pfa=1e-3)
    detections = cfar_detect(synthetic_map(power), cfg)
    bins = [(d.delay_bin, d.doppler_bin) for d in detections]
    assert bins == [(20, 20), (10, 30), (50, 9)]


def test_equal_plateau_resolves_to_lower_delay_bin():
    power = np.zeros((64, 64))
    power[5, 5] = 3.0
    power[5, 6] = 3.0
    power[6, 40] = 3.0
    power[7, 40] = 3.0
    cfg = CfarConfig(train_cells=4, guard_cells=1, pfa=1e-3)
    bins = [(d.delay_bin, d.doppler_bin) for d in cfar_detect(synthetic_map(power), cfg)]
    assert bins == [(5, 5), (6, 40)]


def test_refined_values_stay_within_half_bin():
    rng = np.random.default_rng(4)
    power = rng.exponential(size=(64, 64))
    power[31, 22] = 300.0
    det = cfar_detect(synthetic_map(power), CfarConfig(pfa=1e-3))[0]
    assert abs(det.refined_delay_s / 1e-8 - det.delay_bin) <= 0.5
    assert abs(det.refined_doppler_hz / 100.0 - (det.doppler_bin - 32)) <= 0.5
