"""Clinical index computation from label volumes.

Volumes are voxel counts times the physical voxel size, reported in mL.
Ejection fraction, myocardial mass (1.05 g/mL density) and Mosteller body
surface area follow the standard formulas. Negative ejection fractions are
reported with a warning rather than rejected: a bad segmentation must not
halt a batch run.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import InvalidArgumentError
from .ingest import CaseRecord
from .volume import CardiacPhase, LabelVolume, TissueClass

MYOCARDIAL_DENSITY_G_PER_ML = 1.05


class NegativeEfWarning(UserWarning):
    """End-systolic volume exceeded end-diastolic volume."""


def structure_volume(v: LabelVolume, c: TissueClass) -> float:
    """Volume of one cardiac structure in mL."""
    if c == TissueClass.BACKGROUND:
        raise InvalidArgumentError("background is not a cardiac structure")
    return v.class_count(c) * v.spacing.voxel_volume_mm3 / 1000.0


def ejection_fraction(v_ed: float, v_es: float) -> float:
    """Ejection fraction in percent; warns (not raises) when negative."""
    if v_ed <= 0:
        raise InvalidArgumentError(f"end-diastolic volume must be positive, got {v_ed}")
    ef = (v_ed - v_es) / v_ed * 100.0
    if ef < 0:
        warnings.warn(
            f"negative ejection fraction {ef:.2f}% (V_ES {v_es:.2f} > V_ED {v_ed:.2f})",
            NegativeEfWarning,
            stacklevel=2,
        )
    return ef


def myocardial_mass(v_myo: float) -> float:
    """Myocardial mass in g from myocardial volume in mL."""
    if v_myo < 0:
        raise InvalidArgumentError(f"myocardial volume must be non-negative, got {v_myo}")
    return v_myo * MYOCARDIAL_DENSITY_G_PER_ML


def body_surface_area(height: float, weight: float) -> float:
    """Mosteller body surface area in m² from height (cm) and weight (kg)."""
    if height <= 0 or weight <= 0:
        raise InvalidArgumentError(f"height/weight must be positive, got {height}/{weight}")
    return math.sqrt(height * weight / 3600.0)


@dataclass(frozen=True)
class ClinicalIndices:
    """Per-case volumetric indices (volumes mL, mass g, EF %, BSA m²)."""

    lv_vol_ed: float
    lv_vol_es: float
    rv_vol_ed: float
    rv_vol_es: float
    myo_vol_ed: float
    myo_vol_es: float
    lv_ef: float
    rv_ef: float
    myo_mass: float
    bsa: float


def compute_indices(
    case: CaseRecord, mass_phase: CardiacPhase = CardiacPhase.ED
) -> ClinicalIndices:
    """All clinical indices for one case.

    ``mass_phase`` selects which myocardial volume feeds the mass estimate
    (end-diastolic by default).
    """
    vol = structure_volume
    lv_ed = vol(case.ed_volume, TissueClass.LV)
    lv_es = vol(case.es_volume, TissueClass.LV)
    rv_ed = vol(case.ed_volume, TissueClass.RV)
    rv_es = vol(case.es_volume, TissueClass.RV)
    myo_ed = vol(case.ed_volume, TissueClass.MYO)
    myo_es = vol(case.es_volume, TissueClass.MYO)

    mass_vol = myo_ed if mass_phase == CardiacPhase.ED else myo_es
    meta = case.metadata
    return ClinicalIndices(
        lv_vol_ed=lv_ed,
        lv_vol_es=lv_es,
        rv_vol_ed=rv_ed,
        rv_vol_es=rv_es,
        myo_vol_ed=myo_ed,
        myo_vol_es=myo_es,
        lv_ef=ejection_fraction(lv_ed, lv_es),
        rv_ef=ejection_fraction(rv_ed, rv_es),
        myo_mass=myocardial_mass(mass_vol),
        bsa=body_surface_area(meta.height, meta.weight),
    )
