"""Synthetic abdominal phantoms: ellipsoidal organ, spherical tumors, HU noise.

Provides deterministic ground truth for end-to-end pipeline verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nifti import write_nifti
from .volume_io import CTVolume, MaskVolume

ORGAN_FRACTION = (0.10, 0.40)  # organ volume as a share of the phantom
_MAX_TRIES = 200


class PhantomPlacementError(RuntimeError):
    """Could not place the requested number of disjoint tumors."""


@dataclass(frozen=True)
class PhantomSpec:
    shape: tuple[int, int, int] = (32, 64, 64)
    organ_hu: float = 90.0
    tumor_hu: float = 40.0
    background_hu: float = -80.0
    noise_sigma: float = 10.0
    n_tumors: int = 2
    tumor_radius_range: tuple[float, float] = (3.0, 5.0)
    seed: int = 0
    spacing: tuple[float, float, float] = (2.0, 1.0, 1.0)

    def __post_init__(self):
        if min(self.shape) < 8:
            raise ValueError(f"phantom shape too small: {self.shape}")
        hus = {self.organ_hu, self.tumor_hu, self.background_hu}
        if len(hus) != 3:
            raise ValueError("organ/tumor/background HU values must be pairwise distinct")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_tumors < 0:
            raise ValueError("n_tumors must be >= 0")
        lo, hi = self.tumor_radius_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad tumor radius range {self.tumor_radius_range}")


@dataclass
class PhantomGeometry:
    center: np.ndarray  # (3,) organ ellipsoid centre
    semiaxes: np.ndarray  # (3,) organ ellipsoid semi-axes
    tumors: list[tuple[np.ndarray, float]] = field(default_factory=list)

    def organ_mask(self, shape: tuple[int, int, int]) -> np.ndarray:
        grids = np.ogrid[: shape[0], : shape[1], : shape[2]]
        q = sum(((g - c) / a) ** 2 for g, c, a in zip(grids, self.center, self.semiaxes))
        return q <= 1.0

    def tumor_mask(self, shape: tuple[int, int, int], which: int) -> np.ndarray:
        center, radius = self.tumors[which]
        grids = np.ogrid[: shape[0], : shape[1], : shape[2]]
        d2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        return d2 <= radius**2


def sample_geometry(spec: PhantomSpec) -> PhantomGeometry:
    """Deterministically draw the organ ellipsoid and tumor spheres."""
    rng = np.random.default_rng(spec.seed)
    dims = np.asarray(spec.shape, dtype=float)

    geometry = None
    for _ in range(_MAX_TRIES):
        semiaxes = rng.uniform(0.58, 0.88, size=3) * dims / 2.0
        center = dims / 2.0 + rng.uniform(-0.05, 0.05, size=3) * dims
        if np.any(center - semiaxes < 0.5) or np.any(center + semiaxes > dims - 1.5):
            continue
        candidate = PhantomGeometry(center=center, semiaxes=semiaxes)
        fraction = candidate.organ_mask(spec.shape).mean()
        if ORGAN_FRACTION[0] <= fraction <= ORGAN_FRACTION[1]:
            geometry = candidate
            break
    if geometry is None:
        raise PhantomPlacementError(f"could not fit an organ ellipsoid in {spec.shape}")

    organ = geometry.organ_mask(spec.shape)
    occupied = np.zeros(spec.shape, dtype=bool)
    lo, hi = spec.tumor_radius_range
    for _ in range(spec.n_tumors):
        placed = False
        for _ in range(_MAX_TRIES):
            radius = rng.uniform(lo, hi)
            center = np.array(
                [rng.uniform(c - a, c + a) for c, a in zip(geometry.center, geometry.semiaxes)]
            )
            candidate = PhantomGeometry(center=center, semiaxes=np.ones(3))
            sphere = PhantomGeometry(
                center=geometry.center, semiaxes=geometry.semiaxes, tumors=[(center, radius)]
            ).tumor_mask(spec.shape, 0)
            if not sphere.any():
                continue
            if (sphere & ~organ).any() or (sphere & occupied).any():
                continue
            geometry.tumors.append((center, radius))
            occupied |= sphere
            placed = True
            break
        if not placed:
            raise PhantomPlacementError(
                f"could not place {spec.n_tumors} disjoint tumors (radius {lo}-{hi}) "
                f"inside the organ after {_MAX_TRIES} tries each"
            )
    return geometry


def generate_phantom(spec: PhantomSpec, identifier: str | None = None) -> tuple[CTVolume, MaskVolume]:
    """Render a phantom volume and its {0,1,2} label mask from ``spec``."""
    geometry = sample_geometry(spec)
    labels = np.zeros(spec.shape, dtype=np.int16)
    labels[geometry.organ_mask(spec.shape)] = 1
    for i in range(len(geometry.tumors)):
        labels[geometry.tumor_mask(spec.shape, i)] = 2

    voxels = np.full(spec.shape, spec.background_hu, dtype=np.float32)
    voxels[labels == 1] = spec.organ_hu
    voxels[labels == 2] = spec.tumor_hu
    if spec.noise_sigma > 0:
        # separate generator so geometry draws stay stable if noise is toggled
        noise_rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 1)))
        voxels = voxels + noise_rng.normal(0.0, spec.noise_sigma, spec.shape).astype(np.float32)

    if identifier is None:
        identifier = f"phantom_{spec.seed:04d}"
    volume = CTVolume(voxels=voxels, spacing=spec.spacing, identifier=identifier)
    return volume, MaskVolume(labels=labels)


def write_phantom(volume: CTVolume, mask: MaskVolume, directory: str | Path) -> tuple[Path, Path]:
    """Write a phantom pair as NIfTI files named after the volume identifier."""
    directory = Path(directory)
    vol_path = write_nifti(
        directory / f"{volume.identifier}.nii.gz",
        volume.voxels.astype(np.float32),
        volume.spacing,
    )
    mask_path = write_nifti(
        directory / f"{volume.identifier}_mask.nii.gz",
        mask.labels.astype(np.uint8),
        volume.spacing,
    )
    return vol_path, mask_path
