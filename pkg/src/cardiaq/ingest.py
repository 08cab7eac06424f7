"""Read label volumes and case metadata from disk.

Volume files use a minimal NIfTI-1 subset: little-endian, magic ``n+1\\0``,
348-byte header, ``vox_offset >= 352``, datatypes uint8(2) / int16(4) /
float32(16). Float payloads are accepted only when every value is integral
within 1e-3 (decoder outputs are sometimes stored as floats). Scaling fields
are honored only as identity. Payload voxel order is x-fastest.

Case metadata mirrors the per-case ``Info.cfg`` style: UTF-8 ``Key: value``
lines with required keys ED, ES, Height, Weight and an optional Group.

Case directories follow ``<id>/Info.cfg`` plus ``<id>/<id>_frame<NN>_pred.nii``
for the ED and ES frames (frame numbers zero-padded to two digits) and
optional ``_gt`` ground-truth files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InconsistentCaseError,
    InvalidArgumentError,
    InvalidLabelError,
    MetadataParseError,
    MissingFieldError,
    UnknownClassError,
    UnsupportedDatatypeError,
    UnsupportedRankError,
    VolumeFormatError,
)
from .volume import DiseaseClass, LabelVolume, ProbabilityMap, TissueClass, VoxelSpacing

HEADER_SIZE = 348
MIN_VOX_OFFSET = 352
MAGIC = b"n+1\x00"

# NIfTI-1 datatype code -> numpy dtype (little-endian)
_DTYPES = {2: np.dtype("<u1"), 4: np.dtype("<i2"), 16: np.dtype("<f4")}

REQUIRED_METADATA_KEYS = ("ED", "ES", "Height", "Weight")


def _parse_header(data: bytes):
    if len(data) < HEADER_SIZE:
        raise VolumeFormatError(f"file too short for a header: {len(data)} bytes")
    if data[344:348] != MAGIC:
        raise VolumeFormatError(f"bad magic {data[344:348]!r}")
    (sizeof_hdr,) = struct.unpack_from("<i", data, 0)
    if sizeof_hdr != HEADER_SIZE:
        raise VolumeFormatError(f"sizeof_hdr={sizeof_hdr}, expected {HEADER_SIZE} (little-endian)")
    dim = struct.unpack_from("<8h", data, 40)
    (datatype,) = struct.unpack_from("<h", data, 70)
    (bitpix,) = struct.unpack_from("<h", data, 72)
    pixdim = struct.unpack_from("<8f", data, 76)
    (vox_offset,) = struct.unpack_from("<f", data, 108)
    (scl_slope,) = struct.unpack_from("<f", data, 112)
    (scl_inter,) = struct.unpack_from("<f", data, 116)
    return dim, datatype, bitpix, pixdim, vox_offset, scl_slope, scl_inter


def _parse_payload(data: bytes, rank: int):
    """Shared header checks; returns (dims, spacing tuple, raw ndarray, dtype code)."""
    dim, datatype, bitpix, pixdim, vox_offset, scl_slope, scl_inter = _parse_header(data)

    if dim[0] != rank:
        raise UnsupportedRankError(f"dim[0]={dim[0]}, expected {rank}")
    shape = tuple(int(d) for d in dim[1 : rank + 1])
    if any(d < 1 for d in shape):
        raise VolumeFormatError(f"non-positive dimensions {shape}")

    if datatype not in _DTYPES:
        raise UnsupportedDatatypeError(f"datatype code {datatype} unsupported")
    dtype = _DTYPES[datatype]
    if bitpix != dtype.itemsize * 8:
        raise VolumeFormatError(f"bitpix={bitpix} inconsistent with datatype {datatype}")

    spacing = pixdim[1:4]
    for s in spacing:
        if not (np.isfinite(s) and s > 0):
            raise VolumeFormatError(f"non-positive/non-finite pixdim {spacing}")

    if not np.isfinite(vox_offset) or vox_offset < MIN_VOX_OFFSET or vox_offset != int(vox_offset):
        raise VolumeFormatError(f"vox_offset={vox_offset!r} unsupported")
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        raise VolumeFormatError(
            f"non-identity scaling scl_slope={scl_slope}, scl_inter={scl_inter}"
        )

    n_values = int(np.prod(shape))
    needed = n_values * dtype.itemsize
    payload = data[int(vox_offset) :]
    if len(payload) < needed:
        raise VolumeFormatError(f"payload length {len(payload)} < expected {needed}")
    raw = np.frombuffer(payload, dtype=dtype, count=n_values)
    # x varies fastest in the flat payload
    return shape, spacing, raw.reshape(shape, order="F"), datatype


def read_volume(data: bytes) -> LabelVolume:
    """Decode a label volume from NIfTI-1 subset bytes."""
    shape, spacing, raw, datatype = _parse_payload(data, rank=3)

    if datatype == 16:
        rounded = np.rint(raw.astype(np.float64))
        if not np.isfinite(raw).all() or np.abs(raw - rounded).max() > 1e-3:
            raise InvalidLabelError("float payload has non-integral values")
        values = rounded
    else:
        values = raw.astype(np.int64)

    lo, hi = float(values.min()), float(values.max())
    if lo < 0 or hi > max(TissueClass):
        raise InvalidLabelError(f"label values outside 0..{max(TissueClass)}: [{lo:g}, {hi:g}]")
    return LabelVolume(values.astype(np.uint8), VoxelSpacing(*map(float, spacing)))


def read_probability_map(data: bytes) -> ProbabilityMap:
    """Decode a per-voxel class-probability map (4D float32, dim[0]=4)."""
    shape, spacing, raw, datatype = _parse_payload(data, rank=4)
    if datatype != 16:
        raise UnsupportedDatatypeError("probability maps must use float32 (datatype 16)")
    try:
        return ProbabilityMap(raw.astype(np.float64), spacing=VoxelSpacing(*map(float, spacing)))
    except InvalidArgumentError as exc:
        raise VolumeFormatError(f"payload is not a probability map: {exc}") from exc


def _write_nifti(shape, spacing, payload: np.ndarray, datatype: int) -> bytes:
    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    dim = [len(shape)] + list(shape) + [1] * (7 - len(shape))
    struct.pack_into("<8h", header, 40, *dim)
    dtype = _DTYPES[datatype]
    struct.pack_into("<h", header, 70, datatype)
    struct.pack_into("<h", header, 72, dtype.itemsize * 8)
    pixdim = [1.0] + list(spacing) + [1.0] * (7 - len(spacing))
    struct.pack_into("<8f", header, 76, *pixdim)
    struct.pack_into("<f", header, 108, float(MIN_VOX_OFFSET))
    struct.pack_into("<f", header, 112, 1.0)  # scl_slope identity
    header[344:348] = MAGIC
    pad = bytes(MIN_VOX_OFFSET - HEADER_SIZE)
    return bytes(header) + pad + payload.astype(dtype).tobytes(order="F")


def write_volume(v: LabelVolume, datatype: int = 2) -> bytes:
    """Encode a label volume as NIfTI-1 subset bytes (uint8 by default)."""
    if datatype not in _DTYPES:
        raise UnsupportedDatatypeError(f"datatype code {datatype} unsupported")
    return _write_nifti(v.dims, (v.spacing.dx, v.spacing.dy, v.spacing.dz), v.data, datatype)


def write_probability_map(p: ProbabilityMap) -> bytes:
    sp = p.spacing or VoxelSpacing(1.0, 1.0, 1.0)
    return _write_nifti(p.data.shape, (sp.dx, sp.dy, sp.dz), p.data, 16)


@dataclass(frozen=True)
class CaseMetadata:
    """One patient's non-image data."""

    case_id: str
    height: float  # cm
    weight: float  # kg
    ed_frame: int
    es_frame: int
    group: DiseaseClass | None = None

    def __post_init__(self):
        if not (self.height > 0 and self.weight > 0):
            raise MetadataParseError(
                f"height/weight must be positive, got {self.height}/{self.weight}"
            )
        if self.ed_frame == self.es_frame:
            raise MetadataParseError(f"ED and ES frames must differ, both {self.ed_frame}")


@dataclass(frozen=True)
class CaseRecord:
    """One patient: ED/ES label volumes plus optional ground truths."""

    metadata: CaseMetadata
    ed_volume: LabelVolume
    es_volume: LabelVolume
    ed_truth: LabelVolume | None = None
    es_truth: LabelVolume | None = None

    def __post_init__(self):
        if self.ed_volume.dims != self.es_volume.dims:
            raise InconsistentCaseError(
                f"ED dims {self.ed_volume.dims} != ES dims {self.es_volume.dims}"
            )
        if self.ed_volume.spacing != self.es_volume.spacing:
            raise InconsistentCaseError(
                f"ED spacing {self.ed_volume.spacing} != ES spacing {self.es_volume.spacing}"
            )
        for name, truth, pred in (
            ("ED", self.ed_truth, self.ed_volume),
            ("ES", self.es_truth, self.es_volume),
        ):
            if truth is not None and truth.dims != pred.dims:
                raise InconsistentCaseError(
                    f"{name} truth dims {truth.dims} != prediction dims {pred.dims}"
                )

    @property
    def case_id(self) -> str:
        return self.metadata.case_id


def read_case_metadata(text: str, case_id: str = "") -> CaseMetadata:
    """Parse ``Key: value`` metadata lines."""
    fields: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if sep:
            fields[key.strip()] = value.strip()

    for key in REQUIRED_METADATA_KEYS:
        if key not in fields:
            raise MissingFieldError(f"metadata missing required key {key!r}")

    def number(key: str, cast):
        try:
            return cast(fields[key])
        except ValueError:
            raise MetadataParseError(f"cannot parse {key}={fields[key]!r}") from None

    group = None
    if "Group" in fields and fields["Group"]:
        try:
            group = DiseaseClass.parse(fields["Group"])
        except InvalidArgumentError:
            raise UnknownClassError(f"unknown group {fields['Group']!r}") from None

    return CaseMetadata(
        case_id=case_id,
        height=number("Height", float),
        weight=number("Weight", float),
        ed_frame=number("ED", int),
        es_frame=number("ES", int),
        group=group,
    )


def _frame_name(case_id: str, frame: int, kind: str) -> str:
    return f"{case_id}_frame{frame:02d}_{kind}.nii"


def load_case(directory) -> CaseRecord:
    """Load one case from a directory following the naming convention."""
    directory = Path(directory)
    case_id = directory.name
    info = directory / "Info.cfg"
    if not info.is_file():
        raise FileNotFoundError(f"{info} not found")
    meta = read_case_metadata(info.read_text(encoding="utf-8"), case_id=case_id)

    volumes = {}
    for phase, frame in (("ed", meta.ed_frame), ("es", meta.es_frame)):
        pred_path = directory / _frame_name(case_id, frame, "pred")
        if not pred_path.is_file():
            raise FileNotFoundError(f"{pred_path} not found")
        volumes[phase] = read_volume(pred_path.read_bytes())
        gt_path = directory / _frame_name(case_id, frame, "gt")
        volumes[phase + "_truth"] = (
            read_volume(gt_path.read_bytes()) if gt_path.is_file() else None
        )

    return CaseRecord(
        metadata=meta,
        ed_volume=volumes["ed"],
        es_volume=volumes["es"],
        ed_truth=volumes["ed_truth"],
        es_truth=volumes["es_truth"],
    )


def write_case(record: CaseRecord, root) -> Path:
    """Write a case directory in the convention ``load_case`` reads."""
    root = Path(root)
    directory = root / record.case_id
    directory.mkdir(parents=True, exist_ok=True)
    meta = record.metadata
    lines = [f"ED: {meta.ed_frame}", f"ES: {meta.es_frame}"]
    if meta.group is not None:
        lines.append(f"Group: {meta.group.name}")
    lines += [f"Height: {meta.height}", f"Weight: {meta.weight}"]
    (directory / "Info.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")

    for phase, frame in (("ed", meta.ed_frame), ("es", meta.es_frame)):
        pred = getattr(record, f"{phase}_volume")
        (directory / _frame_name(record.case_id, frame, "pred")).write_bytes(write_volume(pred))
        truth = getattr(record, f"{phase}_truth")
        if truth is not None:
            (directory / _frame_name(record.case_id, frame, "gt")).write_bytes(write_volume(truth))
    return directory


def list_case_dirs(root) -> list[Path]:
    """Case subdirectories of ``root`` (those holding an Info.cfg), sorted by id."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a readable directory")
    return sorted((d for d in root.iterdir() if (d / "Info.cfg").is_file()), key=lambda d: d.name)
