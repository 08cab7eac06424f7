import numpy as np
import pytest

from cardiaq.errors import InvalidArgumentError
from cardiaq.volume import (
    BinaryMask,
    DiseaseClass,
    LabelVolume,
    ProbabilityMap,
    TissueClass,
    VoxelSpacing,
    argmax_labels,
    binary_mask,
    one_hot,
)

from conftest import UNIT_SPACING, label_volume, random_label_volume


class TestVoxelSpacing:
    def test_fields(self):
        sp = VoxelSpacing(1.5, 1.5, 8.0)
        assert sp.voxel_volume_mm3 == 1.5 * 1.5 * 8.0
        assert sp.in_plane == (1.5, 1.5)

    @pytest.mark.parametrize("bad", [(0, 1, 1), (1, -2, 1), (1, 1, float("nan")), (1, 1, float("inf"))])
    def test_rejects_nonpositive_or_nonfinite(self, bad):
        with pytest.raises(InvalidArgumentError):
            VoxelSpacing(*bad)


class TestLabelVolume:
    def test_rejects_bad_codes(self):
        with pytest.raises(InvalidArgumentError):
            label_volume(np.full((2, 2, 1), 7))

    def test_immutable(self):
        v = label_volume(np.zeros((2, 2, 1)))
        with pytest.raises(ValueError):
            v.data[0, 0, 0] = 1

    def test_equality_by_value(self):
        a = label_volume(np.zeros((2, 2, 1)))
        b = label_volume(np.zeros((2, 2, 1)))
        assert a == b
        assert a != label_volume(np.ones((2, 2, 1)))


class TestProbabilityMap:
    def test_simplex_enforced(self):
        bad = np.full((1, 1, 1, 4), 0.3)
        with pytest.raises(InvalidArgumentError):
            ProbabilityMap(bad)

    def test_tolerates_small_deviation(self):
        data = np.full((1, 1, 1, 4), 0.25)
        data[0, 0, 0, 0] += 5e-7
        ProbabilityMap(data)  # within 1e-6


class TestOneHot:
    def test_single_lv_voxel(self):
        v = label_volume(np.full((1, 1, 1), TissueClass.LV))
        p = one_hot(v, classes=4)
        assert p.data[0, 0, 0].tolist() == [0, 0, 0, 1]

    def test_all_background(self):
        v = label_volume(np.zeros((2, 2, 1)))
        p = one_hot(v, classes=4)
        assert (p.data[..., 0] == 1).all()
        assert (p.data[..., 1:] == 0).all()

    def test_too_few_classes_rejected(self):
        v = label_volume(np.full((1, 1, 1), TissueClass.LV))
        with pytest.raises(InvalidArgumentError):
            one_hot(v, classes=3)

    def test_round_trip_identity(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            v = random_label_volume(rng)
            assert argmax_labels(one_hot(v, 4)) == v


class TestArgmaxLabels:
    def test_picks_max(self):
        p = ProbabilityMap(np.array([0.1, 0.2, 0.3, 0.4]).reshape(1, 1, 1, 4))
        assert argmax_labels(p).data[0, 0, 0] == TissueClass.LV

    def test_tie_breaks_to_lowest_code(self):
        p = ProbabilityMap(np.full((1, 1, 1, 4), 0.25))
        assert argmax_labels(p).data[0, 0, 0] == TissueClass.BACKGROUND


class TestBinaryMask:
    def test_matches_class(self):
        v = label_volume(np.full((2, 2, 1), TissueClass.RV))
        assert binary_mask(v, TissueClass.RV).data.all()
        assert not binary_mask(v, TissueClass.LV).data.any()

    def test_masks_partition_volume(self):
        rng = np.random.default_rng(3)
        v = random_label_volume(rng)
        total = np.zeros(v.dims, dtype=int)
        for c in TissueClass:
            total += binary_mask(v, c).data.astype(int)
        assert (total == 1).all()

    def test_count_matches_class_count(self):
        rng = np.random.default_rng(4)
        v = random_label_volume(rng)
        for c in TissueClass:
            assert binary_mask(v, c).count == v.class_count(c)


class TestDiseaseClass:
    def test_codes(self):
        assert [int(c) for c in DiseaseClass] == [0, 1, 2, 3, 4]

    def test_parse_accepts_rv_alias(self):
        assert DiseaseClass.parse("RV") == DiseaseClass.ARV
        assert DiseaseClass.parse("ARV") == DiseaseClass.ARV

    def test_parse_rejects_unknown(self):
        with pytest.raises(InvalidArgumentError):
            DiseaseClass.parse("XYZ")
