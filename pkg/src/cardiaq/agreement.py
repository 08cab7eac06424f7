"""Agreement analysis between automatically and manually determined indices.

Bland-Altman statistics (bias, limits of agreement at 1.96 sample standard
deviations of the differences) together with the Pearson correlation and an
ordinary least-squares fit of the automatic series against the reference.
When the reference has zero variance the regression is degenerate and the
undefined quantities are reported as NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

LOA_MULTIPLIER = 1.96


@dataclass(frozen=True)
class AgreementResult:
    bias: float
    sd_diff: float
    loa_low: float
    loa_high: float
    pearson_r: float
    slope: float
    intercept: float
    n: int

    @property
    def is_degenerate(self) -> bool:
        return math.isnan(self.slope)


def _validate(auto, ref) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(auto, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if a.ndim != 1 or r.ndim != 1 or len(a) != len(r):
        raise InvalidArgumentError(f"series must be 1D of equal length, got {a.shape}/{r.shape}")
    if len(a) < 2:
        raise InvalidArgumentError(f"need at least 2 points, got {len(a)}")
    if not (np.isfinite(a).all() and np.isfinite(r).all()):
        raise InvalidArgumentError("series contain non-finite values")
    return a, r


def bland_altman(auto, ref) -> AgreementResult:
    """Agreement statistics of an automatic series against a reference."""
    a, r = _validate(auto, ref)
    n = len(a)
    d = a - r
    bias = math.fsum(d) / n
    sd = math.sqrt(math.fsum((x - bias) ** 2 for x in d) / (n - 1))

    a_mean = math.fsum(a) / n
    r_mean = math.fsum(r) / n
    sxx = math.fsum((x - r_mean) ** 2 for x in r)
    syy = math.fsum((x - a_mean) ** 2 for x in a)
    sxy = math.fsum((x - r_mean) * (y - a_mean) for x, y in zip(r, a))

    if sxx == 0.0:
        pearson_r = slope = intercept = math.nan
    else:
        pearson_r = sxy / math.sqrt(sxx * syy) if syy > 0.0 else math.nan
        slope = sxy / sxx
        intercept = a_mean - slope * r_mean

    return AgreementResult(
        bias=bias,
        sd_diff=sd,
        loa_low=bias - LOA_MULTIPLIER * sd,
        loa_high=bias + LOA_MULTIPLIER * sd,
        pearson_r=pearson_r,
        slope=slope,
        intercept=intercept,
        n=n,
    )


def percent_within_loa(auto, ref) -> float:
    """Fraction of points whose difference lies inside the limits of agreement."""
    a, r = _validate(auto, ref)
    result = bland_altman(a, r)
    d = a - r
    inside = (d >= result.loa_low) & (d <= result.loa_high)
    return float(inside.sum()) / len(a)
