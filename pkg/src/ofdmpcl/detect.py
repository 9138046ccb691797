"""Clutter suppression and CA-CFAR detection on scattering maps.

The clutter notch zeroes Doppler columns around zero Doppler, where returns
from the static environment collapse when illuminator and sensor are static.
Detection then runs a cell-averaging CFAR with a cross-shaped training
region; the threshold factor assumes exponentially distributed noise power
(magnitude-squared complex Gaussian). Map edges wrap around, matching the
circular delay and Doppler axes of the DFT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import ScatteringMap
from .errors import MapTooSmall, NotchTooWide


@dataclass(frozen=True)
class CfarConfig:
    """Cross-kernel CA-CFAR parameters.

    ``train_cells`` and ``guard_cells`` count cells per side along each axis,
    so the training region holds 4 * train_cells cells in total.
    """

    train_cells: int = 8
    guard_cells: int = 2
    pfa: float = 1e-4

    def __post_init__(self):
        if self.train_cells < 1:
            raise ValueError("need at least one training cell per side")
        if self.guard_cells < 0:
            raise ValueError("guard cells must be non-negative")
        if not 0.0 < self.pfa < 0.5:
            raise ValueError("pfa must lie in (0, 0.5)")

    @property
    def num_training(self) -> int:
        return 4 * self.train_cells

    @property
    def threshold_factor(self) -> float:
        """Scale on the estimated noise mean for the requested pfa."""
        t = self.num_training
        return t * (self.pfa ** (-1.0 / t) - 1.0)


@dataclass
class Detection:
    """One delay-Doppler peak with sub-bin refinement.

    ``refined_delay_s`` is the absolute fast-time delay of the peak;
    ``refined_doppler_hz`` is signed Doppler relative to the zero-Doppler
    column. ``snr_db`` compares peak power against the local CFAR noise
    estimate.
    """

    delay_bin: int
    doppler_bin: int
    refined_delay_s: float
    refined_doppler_hz: float
    peak_power: float
    snr_db: float


def suppress_clutter(smap: ScatteringMap, notch_half_width: int) -> ScatteringMap:
    """Zero Doppler columns within +/- notch_half_width of zero Doppler."""
    if notch_half_width < 0:
        raise ValueError("notch half width must be non-negative")
    num_doppler = smap.power.shape[1]
    zeroed = 2 * notch_half_width + 1
    if zeroed > num_doppler // 2:
        raise NotchTooWide(
            f"notch of {zeroed} columns would remove more than half of the "
            f"{num_doppler} Doppler bins"
        )
    center = smap.zero_doppler_bin
    power = smap.power.copy()
    power[:, center - notch_half_width : center + notch_half_width + 1] = 0.0
    return ScatteringMap(
        power=power,
        delay_bin_s=smap.delay_bin_s,
        doppler_bin_hz=smap.doppler_bin_hz,
    )


def _cross_training_sum(power: np.ndarray, cfg: CfarConfig) -> np.ndarray:
    """Sum of training cells along the delay and Doppler arms, wrapped."""
    total = np.zeros_like(power)
    for axis in (0, 1):
        for off in range(cfg.guard_cells + 1, cfg.guard_cells + cfg.train_cells + 1):
            total += np.roll(power, off, axis=axis)
            total += np.roll(power, -off, axis=axis)
    return total


def _local_maxima(power: np.ndarray) -> np.ndarray:
    """Peaks over the 8-neighborhood; plateau ties go to the cell with the
    lower delay bin, then the lower Doppler bin."""
    peaks = power > 0
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neighbor = np.roll(power, (-di, -dj), axis=(0, 1))
            if (di, dj) < (0, 0):
                peaks &= power > neighbor
            else:
                peaks &= power >= neighbor
    return peaks


def _parabolic_offset(pm: float, p0: float, pp: float) -> float:
    """Vertex of the parabola through three equally spaced power samples."""
    denom = pm + pp - 2.0 * p0
    if denom >= 0.0:
        return 0.0
    offset = 0.5 * (pm - pp) / denom
    return float(np.clip(offset, -0.5, 0.5))


def cfar_detect(smap: ScatteringMap, cfg: CfarConfig) -> list[Detection]:
    """Cell-averaging CFAR over a scattering map.

    A cell is declared a detection when it is a local maximum and exceeds
    threshold_factor times the mean of its cross-shaped training region.
    Detections carry 3-point parabolic sub-bin refinement per axis and are
    sorted by descending peak power.
    """
    power = smap.power
    num_delay, num_doppler = power.shape
    window = 2 * (cfg.train_cells + cfg.guard_cells) + 1
    if num_delay <= window or num_doppler <= window:
        raise MapTooSmall(
            f"map {power.shape} does not exceed the {window}x{window} CFAR window"
        )

    noise_mean = _cross_training_sum(power, cfg) / cfg.num_training
    above = power > cfg.threshold_factor * noise_mean
    hits = np.argwhere(_local_maxima(power) & above)

    detections = []
    for i, j in hits:
        p0 = power[i, j]
        d_delay = _parabolic_offset(
            power[(i - 1) % num_delay, j], p0, power[(i + 1) % num_delay, j]
        )
        d_doppler = _parabolic_offset(
            power[i, (j - 1) % num_doppler], p0, power[i, (j + 1) % num_doppler]
        )
        noise = noise_mean[i, j]
        snr_db = 10.0 * np.log10(p0 / noise) if noise > 0 else np.inf
        detections.append(
            Detection(
                delay_bin=int(i),
                doppler_bin=int(j),
                refined_delay_s=(i + d_delay) * smap.delay_bin_s,
                refined_doppler_hz=(j - num_doppler // 2 + d_doppler)
                * smap.doppler_bin_hz,
                peak_power=float(p0),
                snr_db=float(snr_db),
            )
        )
    detections.sort(key=lambda det: (-det.peak_power, det.delay_bin, det.doppler_bin))
    return detections
