"""Core volumetric data model shared by all other modules.

Label volumes are dense 3D grids of tissue-class codes with physical voxel
spacing. Probability maps carry one class simplex per voxel. All types are
frozen after construction (arrays are made read-only) so they can be shared
across parallel workers.

Conventions fixed here and relied on everywhere else:

* tissue-class integer codes: 0=background, 1=RV, 2=myocardium, 3=LV
* disease-class integer codes: 0=NOR, 1=MINF, 2=DCM, 3=HCM, 4=ARV
* voxel ordering in flat payloads is x-fastest, z-slowest
* argmax ties break toward the lowest class code
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .errors import InvalidArgumentError

SIMPLEX_TOL = 1e-6


class TissueClass(IntEnum):
    BACKGROUND = 0
    RV = 1
    MYO = 2
    LV = 3


#: Cardiac structures, in class-code order (background excluded).
FOREGROUND_CLASSES = (TissueClass.RV, TissueClass.MYO, TissueClass.LV)


class CardiacPhase(Enum):
    ED = "ED"
    ES = "ES"


class DiseaseClass(IntEnum):
    """Diagnostic groups of the five-class prediction task."""

    NOR = 0
    MINF = 1
    DCM = 2
    HCM = 3
    ARV = 4

    @classmethod
    def parse(cls, name: str) -> "DiseaseClass":
        """Map a group string to its class; accepts both 'RV' and 'ARV'."""
        key = name.strip().upper()
        if key == "RV":
            key = "ARV"
        try:
            return cls[key]
        except KeyError:
            raise InvalidArgumentError(f"unknown disease class {name!r}") from None


@dataclass(frozen=True)
class VoxelSpacing:
    """Physical voxel size in mm along x, y, and z (slice spacing)."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            raw = getattr(self, name)
            try:
                v = float(raw)
            except (TypeError, ValueError):
                raise InvalidArgumentError(f"spacing {name}={raw!r} is not a number") from None
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"spacing {name}={v!r} must be positive and finite")
            object.__setattr__(self, name, v)

    @property
    def voxel_volume_mm3(self) -> float:
        return self.dx * self.dy * self.dz

    @property
    def in_plane(self) -> tuple[float, float]:
        return (self.dx, self.dy)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """3D grid of tissue-class codes with physical spacing.

    ``data`` has shape (nx, ny, nz); flat serializations use x-fastest
    (Fortran) ordering.
    """

    data: np.ndarray
    spacing: VoxelSpacing

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.data, other.data)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise InvalidArgumentError(f"label volume must be 3D, got shape {data.shape}")
        if data.size == 0:
            raise InvalidArgumentError("label volume must not be empty")
        values = np.unique(data)
        if values.size and (values.min() < 0 or values.max() > max(TissueClass)):
            raise InvalidArgumentError(f"label values outside 0..{max(TissueClass)}: {values}")
        object.__setattr__(self, "data", _freeze(data.astype(np.uint8)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def slice_labels(self, z: int) -> np.ndarray:
        """The z-th short-axis slice as a 2D (nx, ny) label array."""
        return self.data[:, :, z]

    def class_count(self, c: TissueClass) -> int:
        return int(np.count_nonzero(self.data == int(c)))


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Per-voxel class probabilities, shape (nx, ny, nz, C) with C >= 2.

    Every voxel's probabilities must sum to 1 within SIMPLEX_TOL.
    """

    data: np.ndarray
    spacing: VoxelSpacing | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbabilityMap):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.data, other.data)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 4 or data.shape[3] < 2:
            raise InvalidArgumentError(
                f"probability map must be (nx, ny, nz, C>=2), got shape {data.shape}"
            )
        if not np.isfinite(data).all() or data.min() < 0.0 or data.max() > 1.0:
            raise InvalidArgumentError("probabilities must be finite and within [0, 1]")
        sums = data.sum(axis=3)
        if np.abs(sums - 1.0).max() > SIMPLEX_TOL:
            worst = float(np.abs(sums - 1.0).max())
            raise InvalidArgumentError(f"per-voxel sums deviate from 1 by {worst:g}")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape[:3]  # type: ignore[return-value]

    @property
    def classes(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean mask over a 3D volume or a single 2D slice."""

    data: np.ndarray
    spacing: VoxelSpacing | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.data, other.data)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim not in (2, 3):
            raise InvalidArgumentError(f"mask must be 2D or 3D, got shape {data.shape}")
        object.__setattr__(self, "data", _freeze(data.astype(bool)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.data))


def one_hot(v: LabelVolume, classes: int = len(TissueClass)) -> ProbabilityMap:
    """Probability map with mass 1 at each voxel's label class."""
    max_code = int(v.data.max())
    if classes <= max_code:
        raise InvalidArgumentError(f"classes={classes} must exceed max label code {max_code}")
    out = np.eye(classes, dtype=np.float64)[v.data]
    return ProbabilityMap(out, spacing=v.spacing)


def argmax_labels(p: ProbabilityMap, spacing: VoxelSpacing | None = None) -> LabelVolume:
    """Label volume of per-voxel maximal classes; ties go to the lowest code."""
    if p.classes > len(TissueClass):
        raise InvalidArgumentError(
            f"cannot map {p.classes} classes onto {len(TissueClass)} tissue codes"
        )
    labels = np.argmax(p.data, axis=3).astype(np.uint8)  # argmax returns first maximum
    sp = spacing or p.spacing or VoxelSpacing(1.0, 1.0, 1.0)
    return LabelVolume(labels, sp)


def binary_mask(v: LabelVolume, c: TissueClass) -> BinaryMask:
    """Mask that is true exactly where ``v`` equals class ``c``."""
    return BinaryMask(v.data == int(c), spacing=v.spacing)
