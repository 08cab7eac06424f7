"""Pipeline configuration: a JSON file of plain key-value settings, every one
of which can be overridden on the command line. The resolved configuration
is echoed into each run report so outputs are self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .features import FeatureConfig
from .learn import DualLayerConfig, ForestParams, MlpParams, SvmParams
from .learn.ensemble import DEFAULT_LAYER2_FEATURES
from .volume import CardiacPhase


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    output: str = "out"
    mass_phase: str = "ED"
    ratio_phase: str = "ED"
    mwt_phases: str = "both"  # "both" or "es"
    mwt_units: str = "mm"  # "mm" or "voxel"
    seg_units: str = "voxel"  # "voxel" or "mm"
    sharpen_temperature: float = 0.1
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    voting_weights: tuple[float, float] = (0.5, 0.5)
    layer2_features: tuple[str, ...] = DEFAULT_LAYER2_FEATURES
    rf: dict = field(default_factory=dict)  # ForestParams overrides
    svm: dict = field(default_factory=dict)  # SvmParams overrides
    mlp: dict = field(default_factory=dict)  # MlpParams overrides
    grids: dict = field(default_factory=dict)  # grid search: dotted key -> values

    def __post_init__(self):
        if self.mass_phase not in ("ED", "ES") or self.ratio_phase not in ("ED", "ES"):
            raise ConfigError("mass_phase/ratio_phase must be 'ED' or 'ES'")
        if self.mwt_phases not in ("both", "es"):
            raise ConfigError("mwt_phases must be 'both' or 'es'")
        if self.mwt_units not in ("mm", "voxel") or self.seg_units not in ("mm", "voxel"):
            raise ConfigError("units must be 'mm' or 'voxel'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        ratios = tuple(float(r) for r in self.split_ratios)
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split_ratios must be three non-negative values summing to 1: {ratios}")
        object.__setattr__(self, "split_ratios", ratios)
        object.__setattr__(self, "voting_weights", tuple(float(w) for w in self.voting_weights))
        object.__setattr__(self, "layer2_features", tuple(self.layer2_features))
        if not self.sharpen_temperature > 0:
            raise ConfigError("sharpen_temperature must be positive")
        try:
            self.learner_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad learner parameters: {exc}") from exc

    def feature_config(self) -> FeatureConfig:
        phases = (
            (CardiacPhase.ED, CardiacPhase.ES)
            if self.mwt_phases == "both"
            else (CardiacPhase.ES,)
        )
        return FeatureConfig(
            mass_phase=CardiacPhase[self.mass_phase],
            ratio_phase=CardiacPhase[self.ratio_phase],
            mwt_phases=phases,
            mwt_in_mm=self.mwt_units == "mm",
        )

    def learner_config(self) -> DualLayerConfig:
        mlp_kwargs = dict(self.mlp)
        if "hidden" in mlp_kwargs:
            mlp_kwargs["hidden"] = tuple(mlp_kwargs["hidden"])
        return DualLayerConfig(
            rf=ForestParams(**self.rf),
            svm=SvmParams(**self.svm),
            mlp=MlpParams(**mlp_kwargs),
            voting_weights=self.voting_weights,
            layer2_features=self.layer2_features,
        )

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "workers": self.workers,
            "output": self.output,
            "mass_phase": self.mass_phase,
            "ratio_phase": self.ratio_phase,
            "mwt_phases": self.mwt_phases,
            "mwt_units": self.mwt_units,
            "seg_units": self.seg_units,
            "sharpen_temperature": self.sharpen_temperature,
            "split_ratios": list(self.split_ratios),
            "voting_weights": list(self.voting_weights),
            "layer2_features": list(self.layer2_features),
            "rf": dict(self.rf),
            "svm": dict(self.svm),
            "mlp": dict(self.mlp),
            "grids": dict(self.grids),
        }


_FIELD_NAMES = {f.name for f in fields(PipelineConfig)}


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Configuration from an optional JSON file plus override pairs.

    Override keys may be top-level settings (``seed``) or dotted learner
    parameters (``svm.c``, ``mlp.hidden``).
    """
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")

    for key, value in (overrides or {}).items():
        head, _, tail = key.partition(".")
        if tail:
            if head not in ("rf", "svm", "mlp"):
                raise ConfigError(f"unknown config key {key!r}")
            raw.setdefault(head, {})
            raw[head] = {**raw[head], tail: value}
        else:
            raw[key] = value

    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    try:
        return PipelineConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
