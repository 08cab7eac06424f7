"""Synthetic phantom cases for tests and desk-scale experiments.

A phantom slice is an LV disc inside a concentric myocardial annulus, with an
optional RV crescent (a laterally offset disc minus the LV/MYO region). The
"predicted" volumes are derived from the clean truths by flipping boundary
voxels to a random 4-neighbor's label with a configurable probability, so
segmentation-quality metrics have something to measure. Generation is
deterministic per (spec, seed).

``make_corpus`` writes a small labeled corpus with class-dependent geometry:
dilated LV for DCM, thick wall for HCM, enlarged RV for ARV, low ejection and
uneven end-systolic wall for MINF. The geometry is caricature, not anatomy;
its job is to give the downstream feature and classification stages
structure that mirrors the real task.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpecError
from .ingest import CaseMetadata, CaseRecord, write_case
from .volume import DiseaseClass, LabelVolume, TissueClass, VoxelSpacing


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry of one synthetic case (lengths in voxels)."""

    dims: tuple[int, int, int]
    spacing: VoxelSpacing
    lv_radius: float
    wall_thickness: tuple[float, ...]  # per slice, len == nz
    rv_radius: float = 0.0  # 0 disables the RV crescent
    rv_offset: float = 0.0  # crescent center offset toward -x
    noise: float = 0.0  # boundary flip probability for the predicted copy
    es_lv_radius: float | None = None  # defaults derived from the ED values
    es_wall_thickness: tuple[float, ...] | None = None
    es_rv_radius: float | None = None
    case_id: str = "phantom"
    height: float = 170.0
    weight: float = 70.0
    group: DiseaseClass | None = None
    ed_frame: int = 1
    es_frame: int = 12

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 1:
            raise InvalidSpecError(f"dims {self.dims} must be positive")
        if len(self.wall_thickness) != nz:
            raise InvalidSpecError(
                f"wall profile has {len(self.wall_thickness)} entries for {nz} slices"
            )
        if self.lv_radius <= 0 or any(t <= 0 for t in self.wall_thickness):
            raise InvalidSpecError("LV radius and wall thicknesses must be positive")
        if self.rv_radius < 0 or self.rv_offset < 0:
            raise InvalidSpecError("RV parameters must be non-negative")
        if not 0.0 <= self.noise <= 1.0:
            raise InvalidSpecError(f"noise {self.noise} outside [0, 1]")

        if self.es_lv_radius is None:
            object.__setattr__(self, "es_lv_radius", 0.65 * self.lv_radius)
        if self.es_wall_thickness is None:
            grow = self.lv_radius - self.es_lv_radius
            object.__setattr__(
                self, "es_wall_thickness", tuple(t + grow for t in self.wall_thickness)
            )
        elif len(self.es_wall_thickness) != nz:
            raise InvalidSpecError("ES wall profile length must match slice count")
        if self.es_rv_radius is None:
            object.__setattr__(self, "es_rv_radius", 0.75 * self.rv_radius)
        if self.es_lv_radius <= 0 or any(t <= 0 for t in self.es_wall_thickness):
            raise InvalidSpecError("ES geometry must stay positive")

        margin = min((nx - 1) / 2.0, (ny - 1) / 2.0) - 0.5
        for lv, wall in (
            (self.lv_radius, self.wall_thickness),
            (self.es_lv_radius, self.es_wall_thickness),
        ):
            if lv + max(wall) > margin:
                raise InvalidSpecError(
                    f"annulus extent {lv + max(wall):.1f} does not fit margin {margin:.1f}"
                )
        if self.rv_radius > 0 and self.rv_offset + self.rv_radius > (nx - 1) / 2.0 - 0.5:
            raise InvalidSpecError("RV crescent does not fit inside the grid")


def _rasterize(spec: PhantomSpec, lv_r: float, wall: tuple[float, ...], rv_r: float) -> LabelVolume:
    nx, ny, nz = spec.dims
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    r2 = (ix - cx) ** 2 + (iy - cy) ** 2
    rv2 = (ix - (cx - spec.rv_offset)) ** 2 + (iy - cy) ** 2

    labels = np.zeros(spec.dims, dtype=np.uint8)
    for k in range(nz):
        sl = np.zeros((nx, ny), dtype=np.uint8)
        outer = lv_r + wall[k]
        sl[r2 <= outer * outer] = TissueClass.MYO
        sl[r2 <= lv_r * lv_r] = TissueClass.LV
        if rv_r > 0:
            sl[(rv2 <= rv_r * rv_r) & (sl == TissueClass.BACKGROUND)] = TissueClass.RV
        labels[:, :, k] = sl
    return LabelVolume(labels, spec.spacing)


# in-plane 4-neighborhood, fixed order so draws are reproducible
_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _perturb(volume: LabelVolume, noise: float, rng: np.random.Generator) -> LabelVolume:
    """Flip boundary voxels to a random 4-neighbor's label with probability ``noise``.

    All flips are computed against the original labels so the result does not
    depend on traversal order.
    """
    if noise == 0.0:
        return volume
    data = volume.data
    nx, ny, _ = data.shape
    boundary = np.zeros(data.shape, dtype=bool)
    for dx, dy in _NEIGHBORS:
        shifted = np.roll(data, (dx, dy), axis=(0, 1))
        inner = np.zeros(data.shape, dtype=bool)
        inner[max(dx, 0) : nx + min(dx, 0), max(dy, 0) : ny + min(dy, 0), :] = True
        boundary |= (shifted != data) & inner

    coords = np.argwhere(boundary)  # lexicographic order, stable across runs
    flips = rng.random(len(coords)) < noise
    picks = rng.integers(0, len(_NEIGHBORS), size=len(coords))

    out = data.copy()
    for (x, y, z), flip, pick in zip(coords, flips, picks):
        if not flip:
            continue
        dx, dy = _NEIGHBORS[pick]
        px, py = x + dx, y + dy
        if 0 <= px < nx and 0 <= py < ny:
            out[x, y, z] = data[px, py, z]
    return LabelVolume(out, volume.spacing)


def generate_phantom(spec: PhantomSpec, seed: int) -> CaseRecord:
    """Build one deterministic case: clean truths plus perturbed predictions."""
    ed_truth = _rasterize(spec, spec.lv_radius, spec.wall_thickness, spec.rv_radius)
    es_truth = _rasterize(spec, spec.es_lv_radius, spec.es_wall_thickness, spec.es_rv_radius)

    rng = np.random.default_rng(seed)
    ed_pred = _perturb(ed_truth, spec.noise, rng)
    es_pred = _perturb(es_truth, spec.noise, rng)

    meta = CaseMetadata(
        case_id=spec.case_id,
        height=spec.height,
        weight=spec.weight,
        ed_frame=spec.ed_frame,
        es_frame=spec.es_frame,
        group=spec.group,
    )
    return CaseRecord(
        metadata=meta,
        ed_volume=ed_pred,
        es_volume=es_pred,
        ed_truth=ed_truth,
        es_truth=es_truth,
    )


@dataclass(frozen=True)
class _ClassProfile:
    lv: float
    wall: float
    rv: float
    es_lv: float
    es_wall: float
    es_rv: float
    height: float
    weight: float
    es_wall_uneven: bool = False


# Caricature geometry per disease group (voxel units at ~1.5 mm in plane):
# DCM dilated + weak, HCM thick-walled, ARV big right ventricle, MINF weak
# ejection with uneven end-systolic wall.
_PROFILES = {
    DiseaseClass.NOR: _ClassProfile(9.0, 3.0, 7.0, 6.0, 6.0, 5.2, 172.0, 70.0),
    DiseaseClass.MINF: _ClassProfile(9.0, 3.0, 7.0, 8.4, 3.6, 6.2, 170.0, 78.0, True),
    DiseaseClass.DCM: _ClassProfile(13.0, 2.0, 7.0, 12.2, 2.6, 5.8, 178.0, 85.0),
    DiseaseClass.HCM: _ClassProfile(7.0, 6.0, 6.5, 4.4, 8.4, 5.0, 168.0, 75.0),
    DiseaseClass.ARV: _ClassProfile(9.0, 3.0, 11.5, 6.0, 6.0, 10.8, 174.0, 72.0),
}


def disease_spec(
    group: DiseaseClass,
    case_id: str,
    jitter_rng: np.random.Generator,
    dims: tuple[int, int, int] = (56, 56, 5),
    spacing: VoxelSpacing = VoxelSpacing(1.5, 1.5, 8.0),
    noise: float = 0.04,
) -> PhantomSpec:
    """Class-typical phantom geometry with per-case jitter."""
    p = _PROFILES[group]
    nz = dims[2]
    j = lambda scale: float(jitter_rng.uniform(-scale, scale))  # noqa: E731

    lv = p.lv + j(0.35)
    wall = tuple(p.wall + j(0.25) for _ in range(nz))
    es_lv = p.es_lv + j(0.3)
    if p.es_wall_uneven:
        # alternating thin/thick wall: high per-slice spread at end-systole
        pattern = [2.0 if k % 2 == 0 else 5.2 for k in range(nz)]
        es_wall = tuple(t + j(0.2) for t in pattern)
    else:
        es_wall = tuple(p.es_wall + j(0.25) for _ in range(nz))

    return PhantomSpec(
        dims=dims,
        spacing=spacing,
        lv_radius=lv,
        wall_thickness=wall,
        rv_radius=p.rv + j(0.4),
        rv_offset=15.0,
        noise=noise,
        es_lv_radius=es_lv,
        es_wall_thickness=es_wall,
        es_rv_radius=p.es_rv + j(0.35),
        case_id=case_id,
        height=p.height + j(4.0),
        weight=p.weight + j(4.0),
        group=group,
    )


def make_corpus(
    root,
    cases_per_class: int = 10,
    seed: int = 0,
    dims: tuple[int, int, int] = (56, 56, 5),
    spacing: VoxelSpacing = VoxelSpacing(1.5, 1.5, 8.0),
    noise: float = 0.04,
) -> list[Path]:
    """Write a labeled phantom corpus under ``root``; returns case directories."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    master = np.random.SeedSequence(seed)
    case_seeds = master.spawn(cases_per_class * len(DiseaseClass))

    paths = []
    idx = 0
    for group in DiseaseClass:
        for _ in range(cases_per_class):
            child = case_seeds[idx]
            jitter_rng = np.random.default_rng(child)
            spec = disease_spec(
                group, f"case{idx + 1:03d}", jitter_rng, dims=dims, spacing=spacing, noise=noise
            )
            record = generate_phantom(spec, seed=int(child.generate_state(1)[0]))
            paths.append(write_case(record, root))
            idx += 1
    return paths


def _main(argv=None) -> int:
    """Fixture generator: write a phantom corpus to a directory."""
    import argparse

    parser = argparse.ArgumentParser(description=_main.__doc__)
    parser.add_argument("root", help="output directory for the corpus")
    parser.add_argument("--cases-per-class", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--noise", type=float, default=0.04)
    args = parser.parse_args(argv)
    paths = make_corpus(
        args.root, cases_per_class=args.cases_per_class, seed=args.seed, noise=args.noise
    )
    print(f"wrote {len(paths)} cases under {args.root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(_main())
