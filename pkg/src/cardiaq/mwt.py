"""Myocardial wall thickness geometry.

Per short-axis slice, the wall thickness multiset is the shortest Euclidean
distance from each inner-contour pixel to any outer-contour pixel, computed
exhaustively. Contours come from label adjacency on the segmentation mask:
the inner contour is myocardium touching the LV cavity, the outer contour is
myocardium touching anything that is neither myocardium nor LV (image border
included). On label masks this is exactly the boundary an edge detector
would find, without thresholds to tune.

Per-slice means and standard deviations are aggregated along the long axis
into the four classification statistics: max and spread of the slice means,
and mean and spread of the slice deviations. Sample (n-1) standard deviation
is used throughout; a single contributing value yields 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptySliceError,
    NoContourError,
    NoInnerContourError,
    NoMyocardiumError,
)
from .volume import LabelVolume, TissueClass


def sample_stdev(values) -> float:
    """Sample (n-1) standard deviation; 0.0 when fewer than two values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1))


@dataclass(frozen=True)
class ContourPair:
    """Inner and outer myocardial contour pixels of one slice.

    Pixel coordinates are (x, y) indices; ``spacing`` is the in-plane pixel
    size in mm. The sets are disjoint: pixels touching both the cavity and
    the exterior belong to the inner contour only.
    """

    inner: np.ndarray  # (N, 2) int
    outer: np.ndarray  # (M, 2) int
    spacing: tuple[float, float]


@dataclass(frozen=True)
class MwtSliceResult:
    distances: np.ndarray  # mm, one per inner-contour pixel
    mean: float
    stdev: float


@dataclass(frozen=True)
class MwtFeatures:
    """The four long-axis aggregates over per-slice thickness statistics."""

    max_of_means: float
    stdev_of_means: float
    mean_of_stdevs: float
    stdev_of_stdevs: float


@dataclass(frozen=True)
class SliceSkip:
    """QC entry: a slice that contributed no thickness measurements."""

    slice_index: int
    reason: str


def _adjacent_to(mask: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Pixels of ``mask`` 4-adjacent to at least one ``target`` pixel."""
    padded = np.pad(target, 1, constant_values=False)
    near = (
        padded[:-2, 1:-1] | padded[2:, 1:-1] | padded[1:-1, :-2] | padded[1:-1, 2:]
    )
    return mask & near


def extract_contours(
    labels: np.ndarray, spacing: tuple[float, float] = (1.0, 1.0)
) -> ContourPair:
    """Inner/outer myocardial contours of a 2D label slice.

    Raises EmptySliceError when the slice has no myocardium and
    NoInnerContourError when no myocardium pixel touches the LV cavity
    (both signal that the slice should be skipped and recorded).
    """
    labels = np.asarray(labels)
    myo = labels == TissueClass.MYO
    if not myo.any():
        raise EmptySliceError("slice has no myocardium")

    lv = labels == TissueClass.LV
    inner = _adjacent_to(myo, lv)
    if not inner.any():
        raise NoInnerContourError("no myocardium pixel touches the LV cavity")

    # exterior = anything neither myocardium nor cavity; the image border
    # counts as exterior, which padding with False handles for free
    exterior = ~(myo | lv)
    outer = _adjacent_to(myo, exterior) & ~inner

    return ContourPair(
        inner=np.argwhere(inner), outer=np.argwhere(outer), spacing=spacing
    )


def slice_mwt(pair: ContourPair) -> MwtSliceResult:
    """Thickness multiset of one slice: per inner pixel, the minimum
    physical distance to the outer contour (exhaustive search)."""
    if len(pair.inner) == 0 or len(pair.outer) == 0:
        raise NoContourError(
            f"need both contours, got |inner|={len(pair.inner)}, |outer|={len(pair.outer)}"
        )
    dx, dy = pair.spacing
    ddx = (pair.inner[:, None, 0] - pair.outer[None, :, 0]) * dx
    ddy = (pair.inner[:, None, 1] - pair.outer[None, :, 1]) * dy
    distances = np.sqrt(ddx * ddx + ddy * ddy).min(axis=1)
    return MwtSliceResult(
        distances=distances,
        mean=float(distances.mean()),
        stdev=sample_stdev(distances),
    )


def aggregate_mwt(slices: list[MwtSliceResult]) -> MwtFeatures:
    """The four long-axis statistics over per-slice means and stdevs."""
    if not slices:
        raise NoMyocardiumError("no slice produced thickness measurements")
    means = [s.mean for s in slices]
    stdevs = [s.stdev for s in slices]
    return MwtFeatures(
        max_of_means=max(means),
        stdev_of_means=sample_stdev(means),
        mean_of_stdevs=float(np.mean(stdevs)),
        stdev_of_stdevs=sample_stdev(stdevs),
    )


def case_mwt(
    volume: LabelVolume, in_mm: bool = True
) -> tuple[MwtFeatures, list[SliceSkip]]:
    """Aggregate wall-thickness features over all slices of a volume.

    Slices without myocardium, without an inner contour, or without an outer
    contour are skipped and reported; a case where every slice is skipped
    raises NoMyocardiumError.
    """
    spacing = volume.spacing.in_plane if in_mm else (1.0, 1.0)
    results: list[MwtSliceResult] = []
    skips: list[SliceSkip] = []
    for z in range(volume.dims[2]):
        try:
            pair = extract_contours(volume.slice_labels(z), spacing)
            results.append(slice_mwt(pair))
        except EmptySliceError:
            skips.append(SliceSkip(z, "no-myocardium"))
        except NoInnerContourError:
            skips.append(SliceSkip(z, "no-inner-contour"))
        except NoContourError:
            skips.append(SliceSkip(z, "no-outer-contour"))
    if not results:
        raise NoMyocardiumError(
            f"all {volume.dims[2]} slices skipped: " + ", ".join(s.reason for s in skips)
        )
    return aggregate_mwt(results), skips
