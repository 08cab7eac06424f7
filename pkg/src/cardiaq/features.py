"""Assembly of the per-case classification feature vector, feature-table
persistence, z-score standardization, and stratified case splitting.

The feature set combines the volumetric indices, the volume ratios
LV/RV and MYO/LV at a configurable phase, both ejection fractions, the four
wall-thickness statistics per configured phase, and the patient's height,
weight, and body surface area. Cases whose features cannot be computed
(empty structure in a ratio denominator, no usable myocardium) are
quarantined with a reason instead of crashing the batch.
"""

from __future__ import annotations

import csv
import hashlib
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FeatureUndefinedError,
    InvalidArgumentError,
    NoMyocardiumError,
    SchemaMismatchError,
)
from .indices import compute_indices
from .ingest import CaseRecord
from .mwt import SliceSkip, case_mwt
from .volume import CardiacPhase, DiseaseClass

MWT_STAT_NAMES = ("max_mean", "stdev_mean", "mean_stdev", "stdev_stdev")


@dataclass(frozen=True)
class FeatureConfig:
    """What goes into the feature vector and from which phase."""

    mass_phase: CardiacPhase = CardiacPhase.ED
    ratio_phase: CardiacPhase = CardiacPhase.ED
    mwt_phases: tuple[CardiacPhase, ...] = (CardiacPhase.ED, CardiacPhase.ES)
    mwt_in_mm: bool = True

    def __post_init__(self):
        if not self.mwt_phases:
            raise InvalidArgumentError("at least one MWT phase is required")


def feature_schema(config: FeatureConfig = FeatureConfig()) -> tuple[str, ...]:
    """Ordered feature names for a configuration."""
    names = ["lv_vol_ed", "lv_vol_es", "rv_vol_ed", "rv_vol_es"]
    if config.mass_phase == CardiacPhase.ED:
        names.append("myo_vol_ed")
    names.append("myo_vol_es")
    names += ["myo_mass", "ratio_lv_rv", "ratio_myo_lv", "lv_ef", "rv_ef"]
    for phase in config.mwt_phases:
        suffix = phase.value.lower()
        names += [f"mwt_{stat}_{suffix}" for stat in MWT_STAT_NAMES]
    names += ["height", "weight", "bsa"]
    return tuple(names)


def schema_hash(names) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class FeatureVector:
    """One case's features in schema order."""

    case_id: str
    group: DiseaseClass | None
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.names),):
            raise InvalidArgumentError(
                f"expected {len(self.names)} values, got shape {values.shape}"
            )
        if not np.isfinite(values).all():
            raise FeatureUndefinedError(f"non-finite feature for case {self.case_id}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


@dataclass(frozen=True)
class ExtractionResult:
    vector: FeatureVector
    qc: tuple[str, ...]  # e.g. slice-skip notes from the thickness geometry


def extract_features(case: CaseRecord, config: FeatureConfig = FeatureConfig()) -> ExtractionResult:
    """The full feature vector of one case.

    Raises FeatureUndefinedError (zero ratio denominator) or
    NoMyocardiumError; callers quarantine the case with the message.
    """
    idx = compute_indices(case, mass_phase=config.mass_phase)

    if config.ratio_phase == CardiacPhase.ED:
        lv, rv, myo = idx.lv_vol_ed, idx.rv_vol_ed, idx.myo_vol_ed
    else:
        lv, rv, myo = idx.lv_vol_es, idx.rv_vol_es, idx.myo_vol_es
    if rv == 0.0:
        raise FeatureUndefinedError("ratio_lv_rv undefined: RV volume is zero")
    if lv == 0.0:
        raise FeatureUndefinedError("ratio_myo_lv undefined: LV volume is zero")

    values: dict[str, float] = {
        "lv_vol_ed": idx.lv_vol_ed,
        "lv_vol_es": idx.lv_vol_es,
        "rv_vol_ed": idx.rv_vol_ed,
        "rv_vol_es": idx.rv_vol_es,
        "myo_vol_ed": idx.myo_vol_ed,
        "myo_vol_es": idx.myo_vol_es,
        "myo_mass": idx.myo_mass,
        "ratio_lv_rv": lv / rv,
        "ratio_myo_lv": myo / lv,
        "lv_ef": idx.lv_ef,
        "rv_ef": idx.rv_ef,
        "height": case.metadata.height,
        "weight": case.metadata.weight,
        "bsa": idx.bsa,
    }

    qc: list[str] = []
    for phase in config.mwt_phases:
        volume = case.ed_volume if phase == CardiacPhase.ED else case.es_volume
        feats, skips = case_mwt(volume, in_mm=config.mwt_in_mm)
        suffix = phase.value.lower()
        values[f"mwt_max_mean_{suffix}"] = feats.max_of_means
        values[f"mwt_stdev_mean_{suffix}"] = feats.stdev_of_means
        values[f"mwt_mean_stdev_{suffix}"] = feats.mean_of_stdevs
        values[f"mwt_stdev_stdev_{suffix}"] = feats.stdev_of_stdevs
        qc += [f"{phase.value} slice {s.slice_index}: {s.reason}" for s in skips]

    names = feature_schema(config)
    vector = FeatureVector(
        case_id=case.case_id,
        group=case.metadata.group,
        names=names,
        values=np.array([values[n] for n in names]),
    )
    return ExtractionResult(vector=vector, qc=tuple(qc))


@dataclass(frozen=True)
class QuarantinedCase:
    case_id: str
    reason: str


@dataclass(frozen=True)
class FeatureTable:
    """Feature matrix with row identities and optional truth labels."""

    case_ids: tuple[str, ...]
    groups: tuple[DiseaseClass | None, ...]
    names: tuple[str, ...]
    matrix: np.ndarray  # (n_cases, n_features)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.shape != (len(self.case_ids), len(self.names)):
            raise InvalidArgumentError(
                f"matrix shape {matrix.shape} inconsistent with "
                f"{len(self.case_ids)} cases x {len(self.names)} features"
            )
        if len(self.groups) != len(self.case_ids):
            raise InvalidArgumentError("groups and case_ids lengths differ")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    def __len__(self) -> int:
        return len(self.case_ids)

    @property
    def schema_hash(self) -> str:
        return schema_hash(self.names)

    @classmethod
    def from_vectors(cls, vectors: list[FeatureVector]) -> "FeatureTable":
        if not vectors:
            raise InvalidArgumentError("no feature vectors")
        names = vectors[0].names
        for v in vectors:
            if v.names != names:
                raise SchemaMismatchError(f"case {v.case_id} has a different schema")
        return cls(
            case_ids=tuple(v.case_id for v in vectors),
            groups=tuple(v.group for v in vectors),
            names=names,
            matrix=np.stack([v.values for v in vectors]),
        )

    def take(self, indices) -> "FeatureTable":
        indices = list(indices)
        return FeatureTable(
            case_ids=tuple(self.case_ids[i] for i in indices),
            groups=tuple(self.groups[i] for i in indices),
            names=self.names,
            matrix=self.matrix[indices],
        )

    def labeled_only(self) -> "FeatureTable":
        return self.take([i for i, g in enumerate(self.groups) if g is not None])

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["case_id", "group", *self.names])
        for cid, group, row in zip(self.case_ids, self.groups, self.matrix):
            writer.writerow([cid, group.name if group else "", *[repr(x) for x in row]])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str) -> "FeatureTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidArgumentError("empty feature CSV") from None
        if header[:2] != ["case_id", "group"]:
            raise InvalidArgumentError("feature CSV must start with case_id,group columns")
        names = tuple(header[2:])
        ids, groups, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names) + 2:
                raise InvalidArgumentError(f"line {line_no}: expected {len(names) + 2} fields")
            ids.append(row[0])
            groups.append(DiseaseClass.parse(row[1]) if row[1] else None)
            try:
                rows.append([float(x) for x in row[2:]])
            except ValueError:
                raise InvalidArgumentError(f"line {line_no}: unparseable number") from None
        return cls(
            case_ids=tuple(ids),
            groups=tuple(groups),
            names=names,
            matrix=np.array(rows, dtype=np.float64).reshape(len(ids), len(names)),
        )


def extract_all(
    cases, config: FeatureConfig = FeatureConfig()
) -> tuple[FeatureTable | None, list[QuarantinedCase], dict[str, tuple[str, ...]]]:
    """Extract every case, quarantining the ones that fail."""
    vectors: list[FeatureVector] = []
    quarantined: list[QuarantinedCase] = []
    qc: dict[str, tuple[str, ...]] = {}
    for case in cases:
        try:
            result = extract_features(case, config)
        except (FeatureUndefinedError, NoMyocardiumError) as exc:
            quarantined.append(QuarantinedCase(case.case_id, str(exc)))
            continue
        vectors.append(result.vector)
        if result.qc:
            qc[case.case_id] = result.qc
    table = FeatureTable.from_vectors(vectors) if vectors else None
    return table, quarantined, qc


@dataclass(frozen=True)
class StandardizationParams:
    """Training-set feature means/stdevs; constant features are dropped."""

    names: tuple[str, ...]
    mean: np.ndarray
    stdev: np.ndarray
    dropped: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "stdev", np.asarray(self.stdev, dtype=np.float64))


def fit_standardizer(train: FeatureTable) -> StandardizationParams:
    """Per-feature z-score parameters from the training split only."""
    if len(train) < 2:
        raise InvalidArgumentError(f"need at least 2 training rows, got {len(train)}")
    mean = train.matrix.mean(axis=0)
    stdev = train.matrix.std(axis=0, ddof=1)
    keep = stdev > 0.0
    dropped = tuple(n for n, k in zip(train.names, keep) if not k)
    if dropped:
        warnings.warn(f"dropping constant feature(s): {', '.join(dropped)}", stacklevel=2)
    return StandardizationParams(
        names=tuple(n for n, k in zip(train.names, keep) if k),
        mean=mean[keep],
        stdev=stdev[keep],
        dropped=dropped,
    )


def apply_standardizer(params: StandardizationParams, table: FeatureTable) -> FeatureTable:
    """Standardize a table with stored parameters (schema-checked)."""
    try:
        columns = [table.names.index(n) for n in params.names]
    except ValueError as exc:
        raise SchemaMismatchError(f"table lacks feature required by params: {exc}") from None
    matrix = (table.matrix[:, columns] - params.mean) / params.stdev
    return FeatureTable(
        case_ids=table.case_ids, groups=table.groups, names=params.names, matrix=matrix
    )


def split_indices(labels, ratios, seed: int) -> tuple[list[int], ...]:
    """Stratified, seed-deterministic exact partition of row indices.

    ``labels`` may contain None (unlabeled rows form their own stratum).
    Within each stratum, rows are shuffled and allocated to the splits by
    largest-remainder rounding, so the partition is exact.
    """
    ratios = tuple(float(r) for r in ratios)
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"ratios must be non-negative and sum to 1, got {ratios}")

    strata: dict[object, list[int]] = {}
    for i, lab in enumerate(labels):
        strata.setdefault(lab, []).append(i)
    # deterministic stratum order: class code ascending, unlabeled last
    ordered = sorted(strata.items(), key=lambda kv: (kv[0] is None, getattr(kv[0], "value", 0)))

    rng = np.random.default_rng(seed)
    n_active = sum(1 for r in ratios if r > 0)
    splits: tuple[list[int], ...] = tuple([] for _ in ratios)
    for label, members in ordered:
        if len(members) < n_active:
            warnings.warn(
                f"stratum {getattr(label, 'name', label)} has {len(members)} case(s) "
                f"for {n_active} splits; stratification is best-effort",
                stacklevel=2,
            )
        perm = rng.permutation(len(members))
        shuffled = [members[i] for i in perm]
        exact = [r * len(members) for r in ratios]
        counts = [int(e) for e in exact]
        remainder = len(members) - sum(counts)
        by_fraction = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
        for i in by_fraction[:remainder]:
            counts[i] += 1
        start = 0
        for split, count in zip(splits, counts):
            split.extend(sorted(shuffled[start : start + count]))
            start += count
    return splits


def split_table(
    table: FeatureTable, ratios=(0.7, 0.1, 0.2), seed: int = 0
) -> tuple[FeatureTable, ...]:
    """Stratified train/validation/test split of a feature table."""
    parts = split_indices(table.groups, ratios, seed)
    return tuple(table.take(p) for p in parts)
