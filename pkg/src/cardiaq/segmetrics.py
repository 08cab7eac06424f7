"""Segmentation quality metrics: Dice overlap, average surface distance, and
(95th-percentile) Hausdorff distance.

Conventions, stated so independent reimplementations can match exactly:

* surfaces are foreground voxels with at least one background 6-neighbor
  (4-neighbor in 2D); the volume border counts as background
* distances default to voxel units; mm mode scales coordinates by spacing
  before any distance is computed
* the 95th-percentile Hausdorff applies a nearest-rank percentile
  (ceil(0.95*n)-th smallest) to each directed min-distance multiset and takes
  the maximum of the two
* directed distance sums use math.fsum, which is exactly rounded and hence
  independent of summation order

The searches are exhaustive O(|T'|*|P'|); surfaces at desk scale are small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySurfaceError, InvalidArgumentError
from .volume import (
    FOREGROUND_CLASSES,
    BinaryMask,
    LabelVolume,
    TissueClass,
    binary_mask,
)


def _mask_data(mask) -> np.ndarray:
    data = mask.data if isinstance(mask, BinaryMask) else np.asarray(mask)
    return data.astype(bool)


def dice(truth, pred) -> float:
    """Overlap 2|T∩P| / (|T|+|P|); 1.0 when both masks are empty."""
    t, p = _mask_data(truth), _mask_data(pred)
    if t.shape != p.shape:
        raise InvalidArgumentError(f"mask shapes differ: {t.shape} vs {p.shape}")
    total = int(t.sum()) + int(p.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((t & p).sum()) / total


@dataclass(frozen=True)
class SurfaceSet:
    """Surface point coordinates of one mask, in voxel or mm units."""

    points: np.ndarray  # (N, 2) or (N, 3) float64
    unit: str = "voxel"

    def __len__(self) -> int:
        return len(self.points)


def surface_points(mask, unit_spacing=None) -> SurfaceSet:
    """Foreground cells with a background neighbor (border = background).

    ``unit_spacing``: per-axis physical scale applied to the coordinates;
    None keeps voxel units.
    """
    data = _mask_data(mask)
    if not data.any():
        raise EmptySurfaceError("mask has no foreground")
    padded = np.pad(data, 1, constant_values=False)
    interior = np.ones_like(data)
    for axis in range(data.ndim):
        for shift in (-1, 1):
            sl = [slice(1, -1)] * data.ndim
            sl[axis] = slice(2, None) if shift == 1 else slice(None, -2)
            interior &= padded[tuple(sl)]
    surface = data & ~interior.astype(bool)
    points = np.argwhere(surface).astype(np.float64)
    unit = "voxel"
    if unit_spacing is not None:
        points = points * np.asarray(unit_spacing, dtype=np.float64)
        unit = "mm"
    return SurfaceSet(points=points, unit=unit)


def _check_pair(t: SurfaceSet, p: SurfaceSet):
    if len(t) == 0 or len(p) == 0:
        raise EmptySurfaceError("surface sets must be non-empty")
    if t.unit != p.unit:
        raise InvalidArgumentError(f"unit mismatch: {t.unit} vs {p.unit}")
    if t.points.shape[1] != p.points.shape[1]:
        raise InvalidArgumentError("surface sets have different dimensionality")


def _directed_min_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """For each src point, its distance to the nearest dst point."""
    d2 = np.zeros((len(src), len(dst)))
    for axis in range(src.shape[1]):
        diff = src[:, None, axis] - dst[None, :, axis]
        d2 += diff * diff
    return np.sqrt(d2).min(axis=1)


def asd(t: SurfaceSet, p: SurfaceSet) -> float:
    """Symmetric average surface distance."""
    _check_pair(t, p)
    fwd = _directed_min_distances(t.points, p.points)
    bwd = _directed_min_distances(p.points, t.points)
    return (math.fsum(fwd) + math.fsum(bwd)) / (len(t) + len(p))


def _nearest_rank(sorted_values: np.ndarray, percentile: int) -> float:
    k = math.ceil(percentile / 100.0 * len(sorted_values))
    return float(sorted_values[k - 1])


def hausdorff(t: SurfaceSet, p: SurfaceSet, percentile: int = 100) -> float:
    """Symmetric (percentile-)Hausdorff distance."""
    if percentile not in (95, 100):
        raise InvalidArgumentError(f"percentile must be 95 or 100, got {percentile}")
    _check_pair(t, p)
    fwd = np.sort(_directed_min_distances(t.points, p.points))
    bwd = np.sort(_directed_min_distances(p.points, t.points))
    if percentile == 100:
        return max(float(fwd[-1]), float(bwd[-1]))
    return max(_nearest_rank(fwd, 95), _nearest_rank(bwd, 95))


@dataclass(frozen=True)
class ClassScore:
    dice: float
    hd95: float | None
    asd: float | None
    flag: str | None = None  # "empty-in-both" | "empty-in-one"


@dataclass(frozen=True)
class SegScore:
    """Per-class and mean segmentation quality of one volume pair."""

    per_class: dict[TissueClass, ClassScore]
    mean_dice: float
    mean_hd95: float | None
    mean_asd: float | None
    unit: str = "voxel"
    qc: tuple[str, ...] = field(default_factory=tuple)


def score_case(truth: LabelVolume, pred: LabelVolume, unit: str = "voxel") -> SegScore:
    """Dice/95HD/ASD per foreground class plus unweighted foreground means.

    A class empty in both volumes scores Dice 1 with distances excluded from
    the means; a class empty in exactly one scores Dice 0 with distances set
    to the worst case (the volume diagonal) and flagged.
    """
    if truth.dims != pred.dims:
        raise InvalidArgumentError(f"dims differ: {truth.dims} vs {pred.dims}")
    if truth.spacing != pred.spacing:
        raise InvalidArgumentError("spacings differ")
    if unit not in ("voxel", "mm"):
        raise InvalidArgumentError(f"unit must be 'voxel' or 'mm', got {unit!r}")

    sp = truth.spacing
    scale = (sp.dx, sp.dy, sp.dz) if unit == "mm" else None
    extent = [
        (n - 1) * (s if unit == "mm" else 1.0)
        for n, s in zip(truth.dims, (sp.dx, sp.dy, sp.dz))
    ]
    diagonal = math.sqrt(extent[0] ** 2 + extent[1] ** 2 + extent[2] ** 2)

    per_class: dict[TissueClass, ClassScore] = {}
    qc: list[str] = []
    for c in FOREGROUND_CLASSES:
        t_mask = binary_mask(truth, c)
        p_mask = binary_mask(pred, c)
        t_empty, p_empty = t_mask.count == 0, p_mask.count == 0
        if t_empty and p_empty:
            per_class[c] = ClassScore(1.0, None, None, flag="empty-in-both")
            qc.append(f"{c.name}: empty in truth and prediction; distances skipped")
        elif t_empty or p_empty:
            per_class[c] = ClassScore(0.0, diagonal, diagonal, flag="empty-in-one")
            which = "truth" if t_empty else "prediction"
            qc.append(f"{c.name}: empty in {which} only; distances set to volume diagonal")
        else:
            t_surf = surface_points(t_mask, scale)
            p_surf = surface_points(p_mask, scale)
            per_class[c] = ClassScore(
                dice=dice(t_mask, p_mask),
                hd95=hausdorff(t_surf, p_surf, percentile=95),
                asd=asd(t_surf, p_surf),
            )

    dices = [s.dice for s in per_class.values()]
    hds = [s.hd95 for s in per_class.values() if s.hd95 is not None]
    asds = [s.asd for s in per_class.values() if s.asd is not None]
    return SegScore(
        per_class=per_class,
        mean_dice=float(np.mean(dices)),
        mean_hd95=float(np.mean(hds)) if hds else None,
        mean_asd=float(np.mean(asds)) if asds else None,
        unit=unit,
        qc=tuple(qc),
    )
