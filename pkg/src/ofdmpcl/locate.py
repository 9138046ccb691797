"""Bistatic ellipses and multistatic position fusion.

Each detection pins the target to an ellipse with the pair's illuminator and
sensor as foci: total range = baseline + c * excess delay. Two or more pairs
intersect; the fix minimizes the weighted squared focal-sum residuals with a
damped Gauss-Newton solver, initialized from a coarse deterministic grid
search. Ellipse pairs can intersect twice, so near-equal residual basins are
surfaced as an ambiguity instead of silently picking one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import Detection
from .errors import AmbiguousFix, DegenerateEllipse, NegativeExcess, NoConvergence
from .geometry import SPEED_OF_LIGHT, BistaticPair
from .grid import Numerology

GRID_DIVISIONS = 50  # grid-search resolution: 1/50 of the bounding-box diagonal


@dataclass
class BistaticMeasurement:
    """Total-range (focal sum) measurement for one pair."""

    pair: BistaticPair
    total_range_m: float
    doppler_hz: float
    variance_m2: float

    def __post_init__(self):
        if self.total_range_m < self.pair.baseline_m:
            raise ValueError("total range cannot undercut the baseline")
        if self.variance_m2 <= 0:
            raise ValueError("variance must be positive")


@dataclass
class PositionEstimate:
    """Fused 2D fix with residual and Jacobian-based covariance."""

    position: np.ndarray  # (2,) m
    residual_rms_m: float
    pairs_used: int
    covariance: np.ndarray  # (2, 2) m^2


def measurement_from_detection(
    det: Detection, pair: BistaticPair, numerology: Numerology
) -> BistaticMeasurement:
    """Convert an excess-delay detection into a total-range measurement.

    ``det.refined_delay_s`` must already be relative to the line-of-sight
    peak. The variance follows the uniform-bin model (c * bin / sqrt(12))^2.
    """
    if det.refined_delay_s < 0:
        raise NegativeExcess(
            f"excess delay {det.refined_delay_s * 1e9:.2f} ns is negative"
        )
    sigma = SPEED_OF_LIGHT * numerology.delay_bin_s / np.sqrt(12.0)
    return BistaticMeasurement(
        pair=pair,
        total_range_m=pair.baseline_m + SPEED_OF_LIGHT * det.refined_delay_s,
        doppler_hz=det.refined_doppler_hz,
        variance_m2=sigma**2,
    )


def ellipse_points(meas: BistaticMeasurement, n: int) -> np.ndarray:
    """n points on the measurement's ellipse, foci at the pair positions.

    Point 0 is the major-axis vertex nearest the transmitter; the rest
    follow counter-clockwise in the ellipse frame.
    """
    if n < 1:
        raise ValueError("need at least one point")
    a = 0.5 * meas.total_range_m
    c_half = 0.5 * meas.pair.baseline_m
    if a <= c_half:
        raise DegenerateEllipse(
            f"total range {meas.total_range_m:.3f} m does not exceed baseline "
            f"{meas.pair.baseline_m:.3f} m"
        )
    b = np.sqrt(a**2 - c_half**2)
    center = 0.5 * (meas.pair.tx_position + meas.pair.rx_position)
    # Unit vector from center toward the transmitter-side vertex.
    e1 = (meas.pair.tx_position - meas.pair.rx_position) / meas.pair.baseline_m
    e2 = np.array([-e1[1], e1[0]])
    theta = 2.0 * np.pi * np.arange(n) / n
    return (
        center[None, :]
        + a * np.cos(theta)[:, None] * e1[None, :]
        + b * np.sin(theta)[:, None] * e2[None, :]
    )


def _focal_sums(points: np.ndarray, measurements) -> np.ndarray:
    """Focal sums of shape (npoints, nmeas)."""
    pts = np.atleast_2d(points)
    sums = np.empty((pts.shape[0], len(measurements)))
    for k, m in enumerate(measurements):
        r_tx = np.linalg.norm(pts - m.pair.tx_position[None, :], axis=1)
        r_rx = np.linalg.norm(pts - m.pair.rx_position[None, :], axis=1)
        sums[:, k] = r_tx + r_rx
    return sums


def _residuals(point: np.ndarray, measurements) -> np.ndarray:
    ranges = np.array([m.total_range_m for m in measurements])
    return _focal_sums(point[None, :], measurements)[0] - ranges


def _jacobian(point: np.ndarray, measurements) -> np.ndarray:
    rows = []
    for m in measurements:
        d_tx = point - m.pair.tx_position
        d_rx = point - m.pair.rx_position
        rows.append(d_tx / np.linalg.norm(d_tx) + d_rx / np.linalg.norm(d_rx))
    return np.array(rows)


def _grid_candidates(measurements):
    """Deterministic coarse-grid minima of the weighted cost.

    The search box is the intersection of the per-ellipse bounding boxes
    (the target lies on every ellipse); if inconsistent measurements make
    that box empty, the union box is used instead.
    """
    centers = np.array(
        [0.5 * (m.pair.tx_position + m.pair.rx_position) for m in measurements]
    )
    half = np.array([0.5 * m.total_range_m for m in measurements])
    lo = np.max(centers - half[:, None], axis=0)
    hi = np.min(centers + half[:, None], axis=0)
    if np.any(hi <= lo):
        lo = np.min(centers - half[:, None], axis=0)
        hi = np.max(centers + half[:, None], axis=0)

    diag = float(np.linalg.norm(hi - lo))
    step = diag / GRID_DIVISIONS
    nx = max(int(np.ceil((hi[0] - lo[0]) / step)) + 1, 2)
    ny = max(int(np.ceil((hi[1] - lo[1]) / step)) + 1, 2)
    xs = np.linspace(lo[0], hi[0], nx)
    ys = np.linspace(lo[1], hi[1], ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])

    weights = np.array([1.0 / m.variance_m2 for m in measurements])
    ranges = np.array([m.total_range_m for m in measurements])
    res = _focal_sums(points, measurements) - ranges[None, :]
    cost = (res**2 * weights[None, :]).sum(axis=1).reshape(nx, ny)

    # Interior local minima of the grid cost (4-neighborhood), plus the
    # global grid minimum as a fallback.
    minima = np.ones_like(cost, dtype=bool)
    minima[:-1, :] &= cost[:-1, :] <= cost[1:, :]
    minima[1:, :] &= cost[1:, :] <= cost[:-1, :]
    minima[:, :-1] &= cost[:, :-1] <= cost[:, 1:]
    minima[:, 1:] &= cost[:, 1:] <= cost[:, :-1]
    idx = np.argwhere(minima)
    order = np.argsort(cost[minima], kind="stable")
    candidates = [points[i * ny + j] for i, j in idx[order]]
    best_flat = np.unravel_index(np.argmin(cost), cost.shape)
    candidates.append(points[best_flat[0] * ny + best_flat[1]])
    return candidates, diag


def _gauss_newton(start, measurements, weights, max_iterations):
    """Damped Gauss-Newton descent on the weighted focal-sum cost."""
    point = np.asarray(start, dtype=float).copy()
    res = _residuals(point, measurements)
    cost = float(res @ (weights * res))
    damping = 1e-6
    scale = 1.0 + float(np.linalg.norm(point))

    for _ in range(max_iterations):
        jac = _jacobian(point, measurements)
        grad = jac.T @ (weights * res)
        hess = jac.T @ (weights[:, None] * jac)
        stepped = False
        for _ in range(24):
            try:
                step = np.linalg.solve(
                    hess + damping * np.eye(2) * max(np.trace(hess), 1e-300), grad
                )
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            trial = point - step
            trial_res = _residuals(trial, measurements)
            trial_cost = float(trial_res @ (weights * trial_res))
            if trial_cost <= cost:
                point, res, cost = trial, trial_res, trial_cost
                damping = max(damping / 10.0, 1e-14)
                stepped = True
                break
            damping *= 10.0
        if not stepped or np.linalg.norm(step) < 1e-14 * scale:
            break
    return point, res, cost


def fuse_position(
    measurements, init=None, max_iterations: int = 100
) -> PositionEstimate:
    """Fuse two or more total-range measurements into a 2D fix.

    Minimizes sum_i (focal_sum_i - range_i)^2 / variance_i. Starting points
    come from ``init`` when given, otherwise from a coarse grid search over
    the measurement bounding box; the candidate with the lowest residual
    wins. Raises AmbiguousFix when a second distinct basin fits within 10%
    of the best residual (both candidates attached, lowest first), and
    NoConvergence when the solver cannot reduce the initializer's residual.
    """
    measurements = list(measurements)
    if len(measurements) < 2:
        raise ValueError("a point fix needs at least two measurements")
    weights = np.array([1.0 / m.variance_m2 for m in measurements])

    if init is not None:
        starts = [np.asarray(init, dtype=float)]
        diag = 1.0 + float(np.linalg.norm(starts[0]))
    else:
        candidates, diag = _grid_candidates(measurements)
        starts = candidates[:4]

    solutions = []
    for start in starts:
        start_res = _residuals(np.asarray(start, float), measurements)
        start_cost = float(start_res @ (weights * start_res))
        point, res, cost = _gauss_newton(start, measurements, weights, max_iterations)
        if cost > start_cost:
            raise NoConvergence(
                f"residual grew from {start_cost:.3e} during refinement"
            )
        # Deduplicate basins.
        if any(np.linalg.norm(point - s[0]) < 1e-3 * diag for s in solutions):
            continue
        solutions.append((point, res, cost))

    solutions.sort(key=lambda s: s[2])
    estimates = [_finalize(point, res, measurements, weights) for point, res, _ in solutions]

    if len(estimates) >= 2:
        first, second = estimates[0], estimates[1]
        tol = 1.1 * first.residual_rms_m + 1e-9 * diag
        if second.residual_rms_m <= tol:
            raise AmbiguousFix(
                "two position candidates fit the measurements within 10%",
                [first, second],
            )
    return estimates[0]


def _finalize(point, res, measurements, weights) -> PositionEstimate:
    jac = _jacobian(point, measurements)
    hess = jac.T @ (weights[:, None] * jac)
    try:
        covariance = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        covariance = np.linalg.pinv(hess)
    return PositionEstimate(
        position=point,
        residual_rms_m=float(np.sqrt(np.mean(res**2))),
        pairs_used=len(measurements),
        covariance=covariance,
    )
