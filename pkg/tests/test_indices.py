import math

import mpmath
import numpy as np
import pytest

from cardiaq.errors import InvalidArgumentError
from cardiaq.indices import (
    NegativeEfWarning,
    body_surface_area,
    compute_indices,
    ejection_fraction,
    myocardial_mass,
    structure_volume,
)
from cardiaq.volume import CardiacPhase, LabelVolume, TissueClass, VoxelSpacing

from conftest import case_from_volumes, label_volume, random_label_volume

from oracles import volume_oracle


class TestStructureVolume:
    def test_ten_lv_voxels(self):
        data = np.zeros((10, 1, 1), dtype=np.uint8)
        data[:, 0, 0] = TissueClass.LV
        v = LabelVolume(data, VoxelSpacing(1.5, 1.5, 8.0))
        assert structure_volume(v, TissueClass.LV) == 0.18

    def test_empty_class(self):
        v = label_volume(np.zeros((4, 4, 2)))
        assert structure_volume(v, TissueClass.RV) == 0.0

    def test_background_rejected(self):
        v = label_volume(np.zeros((2, 2, 1)))
        with pytest.raises(InvalidArgumentError):
            structure_volume(v, TissueClass.BACKGROUND)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(17)
        spacing = VoxelSpacing(1.4, 1.6, 7.0)
        for _ in range(5):
            v = random_label_volume(rng, dims=(6, 5, 4), spacing=spacing)
            for c in (TissueClass.RV, TissueClass.MYO, TissueClass.LV):
                expected = volume_oracle(v.data, int(c), (1.4, 1.6, 7.0))
                assert structure_volume(v, c) == pytest.approx(expected, rel=1e-12)

    def test_slice_additivity(self):
        rng = np.random.default_rng(23)
        v = random_label_volume(rng, dims=(6, 6, 5))
        whole = structure_volume(v, TissueClass.MYO)
        per_slice = sum(
            structure_volume(LabelVolume(v.data[:, :, k : k + 1], v.spacing), TissueClass.MYO)
            for k in range(5)
        )
        assert whole == pytest.approx(per_slice, rel=1e-12)

    def test_linear_in_slice_spacing(self):
        rng = np.random.default_rng(29)
        data = rng.integers(0, 4, size=(5, 5, 3)).astype(np.uint8)
        v1 = LabelVolume(data, VoxelSpacing(1.0, 1.0, 4.0))
        v2 = LabelVolume(data, VoxelSpacing(1.0, 1.0, 8.0))
        for c in (TissueClass.RV, TissueClass.MYO, TissueClass.LV):
            assert structure_volume(v2, c) == 2.0 * structure_volume(v1, c)


class TestEjectionFraction:
    @pytest.mark.parametrize(
        "v_ed,v_es,expected", [(100.0, 50.0, 50.0), (80.0, 80.0, 0.0), (120.0, 48.0, 60.0)]
    )
    def test_examples(self, v_ed, v_es, expected):
        assert ejection_fraction(v_ed, v_es) == expected

    def test_scale_invariant(self):
        base = ejection_fraction(120.0, 48.0)
        for k in (0.5, 3.0, 17.0):
            assert ejection_fraction(120.0 * k, 48.0 * k) == pytest.approx(base, rel=1e-12)

    def test_zero_ed_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ejection_fraction(0.0, 10.0)

    def test_negative_ef_warns_not_raises(self):
        with pytest.warns(NegativeEfWarning):
            assert ejection_fraction(50.0, 60.0) == pytest.approx(-20.0)


class TestMyocardialMass:
    def test_density(self):
        assert myocardial_mass(100.0) == 105.0

    def test_zero(self):
        assert myocardial_mass(0.0) == 0.0

    def test_direct_arithmetic(self):
        assert myocardial_mass(143.2) == pytest.approx(150.36, abs=1e-9)

    def test_ratio_exact(self):
        for v in (0.3, 7.0, 123.456):
            assert myocardial_mass(v) / v == 1.05

    def test_negative_rejected(self):
        with pytest.raises(InvalidArgumentError):
            myocardial_mass(-1.0)


class TestBodySurfaceArea:
    def test_perfect_square(self):
        assert body_surface_area(160.0, 90.0) == 2.0

    def test_unit(self):
        assert body_surface_area(60.0, 60.0) == 1.0

    def test_against_high_precision_oracle(self):
        mpmath.mp.dps = 50
        expected = float(mpmath.sqrt(mpmath.mpf(184) * 95 / 3600))
        assert body_surface_area(184.0, 95.0) == pytest.approx(expected, rel=1e-15)

    def test_nonpositive_rejected(self):
        with pytest.raises(InvalidArgumentError):
            body_surface_area(0.0, 70.0)


class TestComputeIndices:
    def _case(self):
        ed = np.zeros((4, 4, 2), dtype=np.uint8)
        ed[0:2, 0, 0] = TissueClass.LV  # 2 voxels
        ed[0:2, 1, 0] = TissueClass.RV
        ed[0:2, 2, 0] = TissueClass.MYO
        es = np.zeros((4, 4, 2), dtype=np.uint8)
        es[0, 0, 0] = TissueClass.LV  # 1 voxel
        es[0, 1, 0] = TissueClass.RV
        es[0:3, 2, 0] = TissueClass.MYO  # 3 voxels
        spacing = VoxelSpacing(10.0, 10.0, 10.0)  # 1 voxel = 1 mL
        return case_from_volumes(
            LabelVolume(ed, spacing), LabelVolume(es, spacing), height=160.0, weight=90.0
        )

    def test_fields(self):
        idx = compute_indices(self._case())
        assert idx.lv_vol_ed == 2.0 and idx.lv_vol_es == 1.0
        assert idx.lv_ef == 50.0
        assert idx.rv_ef == 50.0
        assert idx.myo_mass == 1.05 * 2.0  # ED myocardium by default
        assert idx.bsa == 2.0

    def test_mass_phase_configurable(self):
        idx = compute_indices(self._case(), mass_phase=CardiacPhase.ES)
        assert idx.myo_mass == 1.05 * 3.0
