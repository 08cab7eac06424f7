"""The dual-layer disease classifier.

Layer 1 soft-votes a random forest and a one-vs-rest SVM over all features
for the five diagnostic groups. Because reduced contraction makes prior
infarction and dilated cardiomyopathy look alike to a generic classifier,
every case layer 1 assigns to either of those two groups is re-decided by a
small MLP trained only on the features that actually separate them (wall
thickness heterogeneity and LV volumes by default). Layer 2 never touches
decisions outside that pair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DegenerateTrainingError, InvalidArgumentError, SchemaMismatchError
from ..features import FeatureTable, StandardizationParams, apply_standardizer, fit_standardizer
from ..volume import DiseaseClass
from .forest import ForestParams, RandomForestModel, rf_predict_proba, train_random_forest
from .mlp import MlpModel, MlpParams, mlp_predict_proba, train_mlp
from .svm import SvmModel, SvmParams, svm_predict_proba, train_svm_ovr

N_CLASSES = len(DiseaseClass)
LAYER2_CLASSES = (DiseaseClass.MINF, DiseaseClass.DCM)

#: Discriminators between MINF and DCM: uneven wall-thickness change vs
#: left-ventricular dilation.
DEFAULT_LAYER2_FEATURES = (
    "mwt_max_mean_ed",
    "mwt_stdev_mean_ed",
    "mwt_mean_stdev_ed",
    "mwt_stdev_stdev_ed",
    "mwt_max_mean_es",
    "mwt_stdev_mean_es",
    "mwt_mean_stdev_es",
    "mwt_stdev_stdev_es",
    "lv_vol_ed",
    "lv_vol_es",
    "lv_ef",
)


def soft_vote(prob_sets, weights) -> np.ndarray:
    """Weighted per-class average of probability rows, renormalized."""
    arrays = [np.asarray(p, dtype=np.float64) for p in prob_sets]
    weights = np.asarray(weights, dtype=np.float64)
    if len(arrays) != len(weights):
        raise InvalidArgumentError(f"{len(arrays)} probability sets but {len(weights)} weights")
    if any(a.shape != arrays[0].shape for a in arrays):
        raise InvalidArgumentError("probability sets differ in shape")
    if (weights < 0).any() or weights.sum() <= 0:
        raise InvalidArgumentError(f"weights must be non-negative with positive sum: {weights}")
    combined = sum(w * a for w, a in zip(weights, arrays))
    return combined / combined.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class DualLayerConfig:
    rf: ForestParams = field(default_factory=ForestParams)
    svm: SvmParams = field(default_factory=SvmParams)
    mlp: MlpParams = field(default_factory=MlpParams)
    voting_weights: tuple[float, float] = (0.5, 0.5)
    layer2_features: tuple[str, ...] = DEFAULT_LAYER2_FEATURES


@dataclass(frozen=True)
class DualLayerModel:
    schema: tuple[str, ...]  # raw feature schema expected at predict time
    standardizer: StandardizationParams
    rf: RandomForestModel
    svm: SvmModel
    mlp: MlpModel
    voting_weights: tuple[float, float]
    layer2_schema: tuple[str, ...]  # subset of the standardized schema


@dataclass(frozen=True)
class CasePrediction:
    case_id: str
    predicted: DiseaseClass
    layer1_probs: np.ndarray  # five classes, code order
    layer2_probs: np.ndarray | None  # (MINF, DCM) or None when layer 2 not invoked


def _layer2_columns(standardized_names, wanted) -> tuple[tuple[str, ...], list[int]]:
    available = [n for n in wanted if n in standardized_names]
    missing = [n for n in wanted if n not in standardized_names]
    if missing:
        warnings.warn(
            f"layer-2 feature(s) unavailable after standardization: {', '.join(missing)}",
            stacklevel=3,
        )
    if not available:
        raise DegenerateTrainingError("no layer-2 features available")
    return tuple(available), [standardized_names.index(n) for n in available]


def train_dual(table: FeatureTable, config: DualLayerConfig, seed) -> DualLayerModel:
    """Fit the standardizer, both layer-1 learners, and the layer-2 MLP."""
    labeled = table.labeled_only()
    present = {g for g in labeled.groups}
    missing = [c.name for c in DiseaseClass if c not in present]
    if missing:
        raise DegenerateTrainingError(f"training data missing class(es): {', '.join(missing)}")

    standardizer = fit_standardizer(labeled)
    standardized = apply_standardizer(standardizer, labeled)
    X = standardized.matrix
    y = np.array([int(g) for g in labeled.groups], dtype=np.int64)

    rf_seed, svm_seed, mlp_seed = np.random.SeedSequence(seed).spawn(3)
    rf = train_random_forest(X, y, config.rf, rf_seed)
    svm = train_svm_ovr(X, y, config.svm, svm_seed)

    layer2_schema, columns = _layer2_columns(standardized.names, config.layer2_features)
    pair_rows = [i for i, g in enumerate(labeled.groups) if g in LAYER2_CLASSES]
    x2 = X[np.asarray(pair_rows)][:, columns]
    y2 = np.array(
        [0 if labeled.groups[i] == DiseaseClass.MINF else 1 for i in pair_rows], dtype=np.int64
    )
    mlp = train_mlp(x2, y2, config.mlp, mlp_seed, n_outputs=2)

    return DualLayerModel(
        schema=table.names,
        standardizer=standardizer,
        rf=rf,
        svm=svm,
        mlp=mlp,
        voting_weights=config.voting_weights,
        layer2_schema=layer2_schema,
    )


def layer1_probabilities(model: DualLayerModel, table: FeatureTable) -> np.ndarray:
    """Soft-voted five-class probabilities (layer 1 only)."""
    if table.names != model.schema:
        raise SchemaMismatchError("feature schema differs from the one the model was trained on")
    X = apply_standardizer(model.standardizer, table).matrix
    p_rf = rf_predict_proba(model.rf, X)
    p_svm = svm_predict_proba(model.svm, X, n_classes=N_CLASSES)
    if p_rf.shape[1] < N_CLASSES:  # forest trained before some class codes existed
        p_rf = np.pad(p_rf, ((0, 0), (0, N_CLASSES - p_rf.shape[1])))
    return soft_vote([p_rf, p_svm], model.voting_weights)


def predict_dual(model: DualLayerModel, table: FeatureTable) -> list[CasePrediction]:
    """Layer-1 soft vote, with MINF/DCM decisions re-made by layer 2."""
    layer1 = layer1_probabilities(model, table)
    standardized = apply_standardizer(model.standardizer, table)
    columns = [standardized.names.index(n) for n in model.layer2_schema]
    x2_all = standardized.matrix[:, columns]

    predictions = []
    for i, case_id in enumerate(table.case_ids):
        decision = DiseaseClass(int(np.argmax(layer1[i])))
        layer2 = None
        if decision in LAYER2_CLASSES:
            layer2 = mlp_predict_proba(model.mlp, x2_all[i : i + 1])[0]
            decision = LAYER2_CLASSES[int(np.argmax(layer2))]
        predictions.append(
            CasePrediction(
                case_id=case_id, predicted=decision, layer1_probs=layer1[i], layer2_probs=layer2
            )
        )
    return predictions


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray  # (5, 5) ints, rows = truth, columns = prediction
    accuracy: float
    per_class_recall: dict[str, float]  # NaN when a class has no truth rows
    n: int


def evaluate(preds, truth) -> EvalReport:
    """Confusion matrix, accuracy, and per-class recall."""
    preds = list(preds)
    truth = list(truth)
    if len(preds) != len(truth):
        raise InvalidArgumentError(f"{len(preds)} predictions vs {len(truth)} truths")
    if not preds:
        raise InvalidArgumentError("nothing to evaluate")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for p, t in zip(preds, truth):
        confusion[int(t), int(p)] += 1
    n = len(preds)
    recall = {}
    for c in DiseaseClass:
        row = confusion[int(c)]
        recall[c.name] = float(row[int(c)] / row.sum()) if row.sum() else float("nan")
    return EvalReport(
        confusion=confusion,
        accuracy=float(np.trace(confusion) / n),
        per_class_recall=recall,
        n=n,
    )


def _apply_override(config: DualLayerConfig, key: str, value) -> DualLayerConfig:
    """Set one dotted hyperparameter, e.g. ``svm.c`` or ``rf.n_trees``."""
    part, _, name = key.partition(".")
    if part == "voting_weights" and not name:
        return replace(config, voting_weights=tuple(float(v) for v in value))
    if part not in ("rf", "svm", "mlp") or not name:
        raise InvalidArgumentError(f"unknown hyperparameter {key!r}")
    sub = getattr(config, part)
    if not hasattr(sub, name):
        raise InvalidArgumentError(f"unknown hyperparameter {key!r}")
    if name in ("hidden",):
        value = tuple(int(v) for v in value)
    return replace(config, **{part: replace(sub, **{name: value})})


def tune_dual(
    train_table: FeatureTable,
    val_table: FeatureTable,
    config: DualLayerConfig,
    grids: dict[str, list],
    seed,
) -> tuple[DualLayerModel, DualLayerConfig, list[dict]]:
    """Grid search over config-declared hyperparameter grids, scored by
    validation accuracy; ties keep the earliest combination."""
    if not grids:
        return train_dual(train_table, config, seed), config, []

    keys = sorted(grids)
    combos: list[dict] = [{}]
    for key in keys:
        combos = [{**c, key: v} for c in combos for v in grids[key]]

    truth = [int(g) for g in val_table.groups if g is not None]
    if len(truth) != len(val_table):
        raise InvalidArgumentError("validation split contains unlabeled rows")

    best = None
    trials = []
    for combo in combos:
        candidate = config
        for key, value in combo.items():
            candidate = _apply_override(candidate, key, value)
        model = train_dual(train_table, candidate, seed)
        preds = [int(p.predicted) for p in predict_dual(model, val_table)]
        accuracy = evaluate(preds, truth).accuracy
        trials.append({"params": combo, "val_accuracy": accuracy})
        if best is None or accuracy > best[0]:
            best = (accuracy, model, candidate)
    return best[1], best[2], trials
