"""Loss mathematics of the consistency-trained segmentation stage, as pure
forward evaluations (no training machinery).

Sharpening raises each class probability to 1/T and renormalizes, pushing a
distribution toward its mode while preserving the argmax. The Dice loss is
the soft form of the overlap score with additive smoothing. The unsupervised
consistency term averages the mean squared error between each decoder's
sharpened output (its pseudo-labels) and the raw probability maps of the
other two decoders: six ordered pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .volume import LabelVolume, ProbabilityMap, one_hot

DICE_SMOOTHING = 1e-5


class SharpenUnderflowWarning(UserWarning):
    """Some voxels underflowed to all-zero mass and fell back to one-hot."""


@dataclass(frozen=True)
class SharpenConfig:
    """Temperature of the pseudo-label sharpening transform."""

    temperature: float = 0.1

    def __post_init__(self):
        if not self.temperature > 0:
            raise InvalidArgumentError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class DecoderOutputs:
    """The three decoder probability maps (main plus two complementary)."""

    main: ProbabilityMap
    aux1: ProbabilityMap
    aux2: ProbabilityMap

    def __post_init__(self):
        shapes = {m.data.shape for m in (self.main, self.aux1, self.aux2)}
        if len(shapes) != 1:
            raise InvalidArgumentError(f"decoder outputs disagree in shape: {shapes}")

    def __iter__(self):
        return iter((self.main, self.aux1, self.aux2))


def sharpen(p: ProbabilityMap, cfg: SharpenConfig = SharpenConfig()) -> ProbabilityMap:
    """Temperature-sharpened probability map.

    Voxels whose powered mass underflows to zero in every class fall back to
    a one-hot of the argmax and a warning is emitted.
    """
    powered = np.power(p.data, 1.0 / cfg.temperature)
    sums = powered.sum(axis=3, keepdims=True)
    dead = (sums == 0.0)[..., 0]
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} voxel(s) underflowed during sharpening; "
            "falling back to one-hot of the argmax",
            SharpenUnderflowWarning,
            stacklevel=2,
        )
        onehot = np.eye(p.classes)[np.argmax(p.data, axis=3)]
        powered[dead] = onehot[dead]
        sums = powered.sum(axis=3, keepdims=True)
    return ProbabilityMap(powered / sums, spacing=p.spacing)


def dice_loss(pred: ProbabilityMap, truth: LabelVolume) -> float:
    """Soft Dice loss of a probability map against integer labels."""
    if pred.dims != truth.dims:
        raise InvalidArgumentError(f"shape mismatch: {pred.dims} vs {truth.dims}")
    max_code = int(truth.data.max())
    if max_code >= pred.classes:
        raise InvalidArgumentError(
            f"truth has label {max_code} but prediction has {pred.classes} classes"
        )
    t = one_hot(truth, classes=pred.classes).data
    p = pred.data
    eps = DICE_SMOOTHING
    inter = (p * t).sum(axis=(0, 1, 2))
    sums = p.sum(axis=(0, 1, 2)) + t.sum(axis=(0, 1, 2))
    soft_dice = (2.0 * inter + eps) / (sums + eps)
    return float(1.0 - soft_dice.mean())


def mse_consistency(pseudo: ProbabilityMap, prob: ProbabilityMap) -> float:
    """Mean squared difference over all voxels and classes."""
    if pseudo.data.shape != prob.data.shape:
        raise InvalidArgumentError(
            f"shape mismatch: {pseudo.data.shape} vs {prob.data.shape}"
        )
    diff = pseudo.data - prob.data
    return float(np.mean(diff * diff))


def cc_unsupervised_loss(outs: DecoderOutputs, cfg: SharpenConfig = SharpenConfig()) -> float:
    """Mean consistency loss over the six ordered (pseudo-label, map) pairs."""
    maps = list(outs)
    sharpened = [sharpen(m, cfg) for m in maps]
    terms = [
        mse_consistency(sharpened[i], maps[j])
        for i in range(3)
        for j in range(3)
        if i != j
    ]
    return float(np.mean(terms))


def pairwise_consistency(
    outs: DecoderOutputs, cfg: SharpenConfig = SharpenConfig()
) -> dict[str, float]:
    """Per-pair breakdown keyed ``"i->j"`` plus the overall ``"mean"``."""
    maps = list(outs)
    sharpened = [sharpen(m, cfg) for m in maps]
    breakdown = {
        f"{i}->{j}": mse_consistency(sharpened[i], maps[j])
        for i in range(3)
        for j in range(3)
        if i != j
    }
    breakdown["mean"] = float(np.mean(list(breakdown.values())))
    return breakdown
