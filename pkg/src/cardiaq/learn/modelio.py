"""Versioned model serialization.

The trained dual-layer model is stored as canonical JSON (sorted keys,
minimal separators) with a SHA-256 checksum over the payload, so any
corruption is detected and re-serialization is byte-identical. The feature
schema hash travels with the model and is checked before prediction.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..errors import IntegrityError, ModelFormatError, UnsupportedVersionError
from ..features import StandardizationParams, schema_hash
from .ensemble import DualLayerModel
from .forest import RandomForestModel
from .mlp import MlpModel
from .svm import SvmModel

FORMAT_VERSION = 1


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(model: DualLayerModel) -> bytes:
    payload = {
        "format_version": FORMAT_VERSION,
        "schema": list(model.schema),
        "schema_hash": schema_hash(model.schema),
        "standardizer": {
            "names": list(model.standardizer.names),
            "mean": model.standardizer.mean.tolist(),
            "stdev": model.standardizer.stdev.tolist(),
            "dropped": list(model.standardizer.dropped),
        },
        "rf": model.rf.to_dict(),
        "svm": model.svm.to_dict(),
        "mlp": model.mlp.to_dict(),
        "voting_weights": [float(w) for w in model.voting_weights],
        "layer2_schema": list(model.layer2_schema),
    }
    payload["checksum"] = hashlib.sha256(_canonical(payload)).hexdigest()
    return _canonical(payload)


def load_model(data: bytes) -> DualLayerModel:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"not a model file: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ModelFormatError("missing format_version")
    if payload["format_version"] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"format_version {payload['format_version']}, supported: {FORMAT_VERSION}"
        )
    stored = payload.pop("checksum", None)
    if stored != hashlib.sha256(_canonical(payload)).hexdigest():
        raise IntegrityError("checksum mismatch; file is corrupted")

    try:
        return DualLayerModel(
            schema=tuple(payload["schema"]),
            standardizer=StandardizationParams(
                names=tuple(payload["standardizer"]["names"]),
                mean=np.asarray(payload["standardizer"]["mean"], dtype=np.float64),
                stdev=np.asarray(payload["standardizer"]["stdev"], dtype=np.float64),
                dropped=tuple(payload["standardizer"]["dropped"]),
            ),
            rf=RandomForestModel.from_dict(payload["rf"]),
            svm=SvmModel.from_dict(payload["svm"]),
            mlp=MlpModel.from_dict(payload["mlp"]),
            voting_weights=tuple(float(w) for w in payload["voting_weights"]),
            layer2_schema=tuple(payload["layer2_schema"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model payload: {exc}") from exc
