"""cardiaq: cardiac MRI segmentation quantification and disease prediction.

Turns segmentation label volumes into clinical indices, wall-thickness
geometry, segmentation-quality scores, agreement statistics, and a two-stage
disease prediction. See the README for the CLI walkthrough.
"""

from .volume import (
    BinaryMask,
    CardiacPhase,
    DiseaseClass,
    LabelVolume,
    ProbabilityMap,
    TissueClass,
    VoxelSpacing,
    argmax_labels,
    binary_mask,
    one_hot,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "CardiacPhase",
    "DiseaseClass",
    "LabelVolume",
    "ProbabilityMap",
    "TissueClass",
    "VoxelSpacing",
    "argmax_labels",
    "binary_mask",
    "one_hot",
    "__version__",
]
