"""Covering contents, box-counting dimension and distortion bounds.

Contents use origin-aligned square boxes of side delta, an upper bound
for the cover infimum that is computable in O(points) per scale.  Box
dimension is an ordinary least-squares fit of log N(delta) against
log(1/delta) over caller-chosen scales; no automatic scale selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import PointCloud

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class CoverEstimate:
    """Occupied-box count at one scale and the induced content value."""

    scale: float
    box_count: int
    content_t: float


@dataclass(frozen=True)
class DimensionFit:
    """Least-squares box-counting fit.  The slope is reported raw
    (no clamping); out-of-range values are the caller's signal."""

    slope: float
    intercept: float
    r_squared: float
    scale_range: tuple[float, float]
    counts: tuple[tuple[float, int], ...]


def box_count(cloud: PointCloud, delta: float) -> int:
    """Number of occupied origin-aligned boxes of side delta."""
    if len(cloud) == 0:
        raise ValueError("empty cloud")
    if not (delta > 0):
        raise ValueError("delta must be positive")
    ix = np.floor(cloud.points.real / delta).astype(np.int64)
    iy = np.floor(cloud.points.imag / delta).astype(np.int64)
    # pack both indices into one key; coordinates are desk-scale so 2^31 bins suffice
    key = (ix + 2 ** 31) * (2 ** 32) + (iy + 2 ** 31)
    return int(np.unique(key).size)


def dyadic_content(cloud: PointCloud, t: float, delta: float) -> CoverEstimate:
    """Upper bound for the t-content at scale delta: N(delta) * (sqrt(2) delta)^t."""
    if not (0 < t <= 2):
        raise ValueError(f"t must lie in (0, 2], got {t}")
    count = box_count(cloud, delta)
    return CoverEstimate(delta, count, count * (SQRT2 * delta) ** t)


def measure_function_content(cloud: PointCloud, h: Callable[[float], float],
                             delta: float) -> float:
    """Upper bound for the gauge content: N(delta) * h(sqrt(2) delta).

    The gauge must be nondecreasing with h(0) = 0; monotonicity is
    spot-checked on a logarithmic grid of scales.
    """
    _check_gauge(h)
    count = box_count(cloud, delta)
    return count * float(h(SQRT2 * delta))


def _check_gauge(h: Callable[[float], float]) -> None:
    s = np.logspace(-9, 0, 40)
    vals = np.array([h(float(v)) for v in s])
    if np.any(np.diff(vals) < -1e-12):
        raise ValueError("gauge function must be nondecreasing")
    if vals[0] < -1e-12:
        raise ValueError("gauge function must be nonnegative")


# shipped gauge profiles
def gauge_power(t: float) -> Callable[[float], float]:
    return lambda s: s ** t


def gauge_linear(s: float) -> float:
    return s


def gauge_log_damped(s: float) -> float:
    """h(s) = s / max(log(1/s), 1); vanishes faster than s as s -> 0."""
    return s / max(math.log(1.0 / s), 1.0) if s > 0 else 0.0


def box_dimension(cloud: PointCloud, scales: Sequence[float]) -> DimensionFit:
    """OLS fit of log N(delta) vs log(1/delta) over at least five scales
    spanning 1.5 decades."""
    scales = sorted(float(s) for s in scales)
    if len(scales) < 5:
        raise ValueError("need at least 5 scales")
    if scales[-1] / scales[0] < 10 ** 1.5 - 1e-9:
        raise ValueError("scales must span at least 1.5 decades")
    counts = [(d, box_count(cloud, d)) for d in scales]
    xs = np.array([math.log(1.0 / d) for d, _ in counts])
    ys = np.array([math.log(c) for _, c in counts])
    if np.allclose(ys, ys[0]):
        raise ValueError("degenerate fit: box counts do not vary over the scales")
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return DimensionFit(float(slope), float(intercept), r2,
                        (scales[0], scales[-1]), tuple(counts))


# -- theoretical bounds --------------------------------------------------------


def astala_bound(t: float, K: float) -> float:
    """Dimension distortion bound 2Kt / (2 + (K-1)t) for K-quasiconformal maps."""
    if not (0 <= t <= 2):
        raise ValueError(f"t must lie in [0, 2], got {t}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return 2.0 * K * t / (2.0 + (K - 1.0) * t)


def holder_dim_bound(t: float, K: float) -> float:
    """Bound 1 + K(t-1), valid for t in (1, 1 + 1/K)."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not (1.0 < t < 1.0 + 1.0 / K):
        raise ValueError(f"t must lie in (1, 1 + 1/K) = (1, {1 + 1 / K}), got {t}")
    return 1.0 + K * (t - 1.0)


# -- end-to-end distortion experiment ---------------------------------------------


@dataclass(frozen=True)
class DistortionReport:
    """Both dimension fits plus the applicable theoretical bound and pass flag."""

    coeff_label: str
    set_label: str
    K: float
    dim_source: DimensionFit
    dim_image: DimensionFit
    bound: float
    sobolev_w12: bool
    passed: bool


def distortion_experiment(mu, cloud: PointCloud, scales: Sequence[float],
                          tol: float = 1e-10, max_iter: int = 200,
                          sobolev_w12: bool | None = None,
                          solution=None) -> DistortionReport:
    """Solve, transport the cloud, fit both box dimensions, check the bound.

    For W^{1,2}-class coefficients the pass flag additionally requires
    |dim(image) - dim(source)| <= 0.15 (dimension preservation at desk
    scale); otherwise only the distortion bound + 0.1 applies.  The class
    flag defaults to a label heuristic: mollified coefficients and the
    logarithmic example count as W^{1,2}.
    """
    from . import solver  # deferred import

    if sobolev_w12 is None:
        sobolev_w12 = ("mollify" in mu.label) or mu.label.startswith("logexample")
    sol = solution if solution is not None else solver.neumann_solve(mu, tol=tol, max_iter=max_iter)
    image = solver.evaluate_map(sol, cloud)
    fit_src = box_dimension(cloud, scales)
    fit_img = box_dimension(image, scales)
    bound = astala_bound(min(fit_src.slope, 2.0), mu.ellipticity)
    passed = fit_img.slope <= bound + 0.1
    if sobolev_w12:
        passed = passed and abs(fit_img.slope - fit_src.slope) <= 0.15
    return DistortionReport(mu.label, cloud.label, mu.ellipticity,
                            fit_src, fit_img, bound, sobolev_w12, passed)
