import struct

import numpy as np
import pytest

from cardiaq.errors import (
    CardiaqError,
    InconsistentCaseError,
    InvalidLabelError,
    MetadataParseError,
    MissingFieldError,
    UnknownClassError,
    UnsupportedDatatypeError,
    UnsupportedRankError,
    VolumeFormatError,
)
from cardiaq.ingest import (
    CaseMetadata,
    load_case,
    read_case_metadata,
    read_probability_map,
    read_volume,
    write_case,
    write_probability_map,
    write_volume,
)
from cardiaq.phantom import PhantomSpec, generate_phantom
from cardiaq.volume import DiseaseClass, LabelVolume, ProbabilityMap, VoxelSpacing

from conftest import UNIT_SPACING, label_volume


def golden_bytes(dim=(3, 4, 4, 2, 1, 1, 1, 1), pixdim=(1.0, 1.5, 1.5, 8.0, 0, 0, 0, 0),
                 datatype=2, bitpix=8, vox_offset=352.0, scl_slope=1.0, scl_inter=0.0,
                 magic=b"n+1\x00", payload=None):
    """Hand-assembled header at the documented offsets."""
    header = bytearray(348)
    struct.pack_into("<i", header, 0, 348)
    struct.pack_into("<8h", header, 40, *dim)
    struct.pack_into("<h", header, 70, datatype)
    struct.pack_into("<h", header, 72, bitpix)
    struct.pack_into("<8f", header, 76, *pixdim)
    struct.pack_into("<f", header, 108, vox_offset)
    struct.pack_into("<f", header, 112, scl_slope)
    struct.pack_into("<f", header, 116, scl_inter)
    header[344:348] = magic
    if payload is None:
        payload = bytes(range(4)) * 8  # 32 voxels, values 0..3
    pad = max(0, int(vox_offset) - 348)
    return bytes(header) + bytes(pad) + payload


class TestReadVolume:
    def test_golden_file(self):
        v = read_volume(golden_bytes())
        assert v.dims == (4, 4, 2)
        assert v.spacing == VoxelSpacing(1.5, 1.5, 8.0)
        # payload is x-fastest: first four bytes are column x=0..3 at y=0,z=0
        assert v.data[:, 0, 0].tolist() == [0, 1, 2, 3]

    def test_bad_magic(self):
        with pytest.raises(VolumeFormatError):
            read_volume(golden_bytes(magic=b"ni1\x00"))

    def test_unsupported_datatype(self):
        with pytest.raises(UnsupportedDatatypeError):
            read_volume(golden_bytes(datatype=8, bitpix=32))

    def test_unsupported_rank(self):
        with pytest.raises(UnsupportedRankError):
            read_volume(golden_bytes(dim=(2, 4, 8, 1, 1, 1, 1, 1)))

    def test_label_out_of_range(self):
        payload = bytes([7] * 32)
        with pytest.raises(InvalidLabelError):
            read_volume(golden_bytes(payload=payload))

    def test_truncated_payload(self):
        data = golden_bytes()
        with pytest.raises(VolumeFormatError):
            read_volume(data[:-5])

    def test_truncated_header(self):
        with pytest.raises(VolumeFormatError):
            read_volume(golden_bytes()[:100])

    def test_nonidentity_scaling_rejected(self):
        with pytest.raises(VolumeFormatError):
            read_volume(golden_bytes(scl_slope=2.0))
        with pytest.raises(VolumeFormatError):
            read_volume(golden_bytes(scl_inter=1.0))

    def test_zero_slope_accepted(self):
        read_volume(golden_bytes(scl_slope=0.0))

    def test_nonpositive_pixdim_rejected(self):
        with pytest.raises(VolumeFormatError):
            read_volume(golden_bytes(pixdim=(1.0, 0.0, 1.5, 8.0, 0, 0, 0, 0)))

    def test_vox_offset_below_minimum(self):
        with pytest.raises(VolumeFormatError):
            read_volume(golden_bytes(vox_offset=340.0))

    def test_int16_payload(self):
        payload = struct.pack("<32h", *([0, 1, 2, 3] * 8))
        v = read_volume(golden_bytes(datatype=4, bitpix=16, payload=payload))
        assert v.data.max() == 3

    def test_float_payload_integral(self):
        payload = struct.pack("<32f", *([0.0, 1.0, 2.0, 3.0002] * 8))
        v = read_volume(golden_bytes(datatype=16, bitpix=32, payload=payload))
        assert v.data[3, 0, 0] == 3

    def test_float_payload_nonintegral(self):
        payload = struct.pack("<32f", *([0.0, 1.0, 2.0, 2.5] * 8))
        with pytest.raises(InvalidLabelError):
            read_volume(golden_bytes(datatype=16, bitpix=32, payload=payload))

    def test_bitpix_mismatch(self):
        with pytest.raises(VolumeFormatError):
            read_volume(golden_bytes(bitpix=16))

    def test_big_endian_rejected(self):
        data = bytearray(golden_bytes())
        struct.pack_into(">i", data, 0, 348)
        with pytest.raises(VolumeFormatError):
            read_volume(bytes(data))


class TestRoundTrip:
    @pytest.mark.parametrize("datatype", [2, 4, 16])
    def test_write_read_preserves_everything(self, datatype):
        rng = np.random.default_rng(5)
        v = LabelVolume(
            rng.integers(0, 4, size=(5, 4, 3)).astype(np.uint8),
            VoxelSpacing(1.37, 1.68, 5.0),
        )
        v2 = read_volume(write_volume(v, datatype=datatype))
        assert v2.dims == v.dims
        assert np.array_equal(v2.data, v.data)
        # spacing survives the float32 header fields
        assert v2.spacing == VoxelSpacing(
            np.float32(1.37), np.float32(1.68), np.float32(5.0)
        )

    def test_probability_map_round_trip(self):
        rng = np.random.default_rng(6)
        raw = rng.random((3, 3, 2, 4))
        raw /= raw.sum(axis=3, keepdims=True)
        p = ProbabilityMap(raw.astype(np.float32).astype(np.float64), spacing=UNIT_SPACING)
        p2 = read_probability_map(write_probability_map(p))
        assert np.allclose(p2.data, p.data, atol=1e-7)

    def test_probability_map_requires_rank4(self):
        with pytest.raises(UnsupportedRankError):
            read_probability_map(golden_bytes())


class TestHeaderFuzzing:
    def test_mutations_never_crash(self):
        base = golden_bytes()
        rng = np.random.default_rng(1234)
        outcomes = {"ok": 0, "rejected": 0}
        for _ in range(400):
            data = bytearray(base)
            for _ in range(int(rng.integers(1, 4))):
                pos = int(rng.integers(0, 348))
                data[pos] = int(rng.integers(0, 256))
            try:
                read_volume(bytes(data))
                outcomes["ok"] += 1
            except CardiaqError:
                outcomes["rejected"] += 1
        # a typed error or a successful parse, never an unhandled crash
        assert outcomes["rejected"] > 0

    def test_critical_field_mutations_rejected(self):
        for kwargs in (
            {"magic": b"XXXX"},
            {"datatype": 99},
            {"dim": (5, 4, 4, 2, 1, 1, 1, 1)},
            {"pixdim": (1.0, -1.5, 1.5, 8.0, 0, 0, 0, 0)},
        ):
            with pytest.raises(CardiaqError):
                read_volume(golden_bytes(**kwargs))


class TestMetadata:
    GOLDEN = "ED: 1\nES: 12\nGroup: DCM\nHeight: 184.0\nWeight: 95.0"

    def test_golden(self):
        meta = read_case_metadata(self.GOLDEN, case_id="patient042")
        assert meta == CaseMetadata("patient042", 184.0, 95.0, 1, 12, DiseaseClass.DCM)

    def test_missing_weight(self):
        text = "ED: 1\nES: 12\nHeight: 184.0"
        with pytest.raises(MissingFieldError):
            read_case_metadata(text)

    def test_unknown_group(self):
        with pytest.raises(UnknownClassError):
            read_case_metadata("ED: 1\nES: 12\nGroup: XYZ\nHeight: 184\nWeight: 95")

    def test_group_rv_alias(self):
        meta = read_case_metadata("ED: 1\nES: 12\nGroup: RV\nHeight: 184\nWeight: 95")
        assert meta.group == DiseaseClass.ARV

    def test_unparseable_number(self):
        with pytest.raises(MetadataParseError):
            read_case_metadata("ED: one\nES: 12\nHeight: 184\nWeight: 95")

    def test_same_frames_rejected(self):
        with pytest.raises(MetadataParseError):
            read_case_metadata("ED: 3\nES: 3\nHeight: 184\nWeight: 95")

    def test_group_optional(self):
        meta = read_case_metadata("ED: 1\nES: 12\nHeight: 184\nWeight: 95")
        assert meta.group is None


class TestLoadCase:
    def test_phantom_round_trip(self, tmp_path, simple_phantom_spec):
        record = generate_phantom(simple_phantom_spec, seed=3)
        directory = write_case(record, tmp_path)
        loaded = load_case(directory)
        assert loaded == record

    def test_missing_es_file(self, tmp_path, simple_phantom_spec):
        record = generate_phantom(simple_phantom_spec, seed=3)
        directory = write_case(record, tmp_path)
        es_files = [p for p in directory.iterdir() if "frame12_pred" in p.name]
        es_files[0].unlink()
        with pytest.raises(FileNotFoundError):
            load_case(directory)

    def test_dims_mismatch(self, tmp_path, simple_phantom_spec):
        record = generate_phantom(simple_phantom_spec, seed=3)
        directory = write_case(record, tmp_path)
        other = label_volume(np.zeros((4, 4, 3)))
        (directory / "phantom_frame12_pred.nii").write_bytes(write_volume(other))
        # also drop the truth file so only the prediction mismatch fires
        (directory / "phantom_frame12_gt.nii").unlink()
        with pytest.raises(InconsistentCaseError):
            load_case(directory)
