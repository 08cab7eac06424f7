import numpy as np
import pytest

from cardiaq.ingest import CaseMetadata, CaseRecord
from cardiaq.phantom import PhantomSpec, generate_phantom, make_corpus
from cardiaq.volume import LabelVolume, TissueClass, VoxelSpacing

UNIT_SPACING = VoxelSpacing(1.0, 1.0, 1.0)


def annulus_slice(n=24, lv_radius=5.0, thickness=3.0, rv_radius=0.0, rv_offset=0.0):
    """One label slice: LV disc in a MYO ring, optional RV crescent."""
    c = (n - 1) / 2.0
    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r2 = (ix - c) ** 2 + (iy - c) ** 2
    labels = np.zeros((n, n), dtype=np.uint8)
    outer = lv_radius + thickness
    labels[r2 <= outer * outer] = TissueClass.MYO
    labels[r2 <= lv_radius * lv_radius] = TissueClass.LV
    if rv_radius > 0:
        rv2 = (ix - (c - rv_offset)) ** 2 + (iy - c) ** 2
        labels[(rv2 <= rv_radius * rv_radius) & (labels == 0)] = TissueClass.RV
    return labels


def label_volume(data, spacing=UNIT_SPACING):
    return LabelVolume(np.asarray(data, dtype=np.uint8), spacing)


def random_label_volume(rng, dims=(8, 8, 3), spacing=UNIT_SPACING):
    return LabelVolume(rng.integers(0, 4, size=dims).astype(np.uint8), spacing)


def random_blob_mask(rng, max_dim=16):
    """Union of a few random boxes: surfaces stay small enough for the
    pure-Python oracles."""
    dims = tuple(int(rng.integers(4, max_dim + 1)) for _ in range(3))
    mask = np.zeros(dims, dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        lo = [int(rng.integers(0, d)) for d in dims]
        size = [int(rng.integers(1, max(2, d // 2))) for d in dims]
        sl = tuple(slice(lo[i], min(lo[i] + size[i], dims[i])) for i in range(3))
        mask[sl] = True
    if not mask.any():
        mask[tuple(d // 2 for d in dims)] = True
    return mask


def case_from_volumes(ed, es, case_id="caseX", height=170.0, weight=70.0, group=None):
    meta = CaseMetadata(
        case_id=case_id, height=height, weight=weight, ed_frame=1, es_frame=12, group=group
    )
    return CaseRecord(metadata=meta, ed_volume=ed, es_volume=es)


@pytest.fixture
def simple_phantom_spec():
    return PhantomSpec(
        dims=(24, 24, 3),
        spacing=UNIT_SPACING,
        lv_radius=5.0,
        wall_thickness=(3.0, 3.0, 3.0),
        rv_radius=0.0,
        noise=0.0,
    )


@pytest.fixture
def noisy_phantom_case():
    spec = PhantomSpec(
        dims=(32, 32, 4),
        spacing=VoxelSpacing(1.5, 1.5, 8.0),
        lv_radius=6.0,
        wall_thickness=(3.0, 3.0, 3.0, 3.0),
        rv_radius=5.0,
        rv_offset=10.0,
        noise=0.1,
        case_id="noisy",
    )
    return generate_phantom(spec, seed=11)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """50-case labeled phantom corpus (10 per class), session-wide."""
    root = tmp_path_factory.mktemp("corpus")
    make_corpus(root, cases_per_class=10, seed=7)
    return root
