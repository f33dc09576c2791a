"""CT volume / mask containers, HU windowing and 2.5D slice extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nifti import read_nifti
from .validation import check_finite, check_ndim, check_odd

DEFAULT_SEMANTICS = {0: "background", 1: "organ", 2: "tumor"}


class NonVolumeError(ValueError):
    """File does not hold a 3D scalar volume."""


class NonFiniteVoxelError(ValueError):
    """Volume contains NaN or infinite voxels."""


class MaskShapeError(ValueError):
    """Mask shape differs from its paired volume."""


class MaskLabelError(ValueError):
    """Mask holds non-integer values or labels outside the declared semantics."""


@dataclass
class CTVolume:
    """3D scalar field in Hounsfield units, axis order (depth, height, width)."""

    voxels: np.ndarray
    spacing: tuple[float, float, float]
    identifier: str

    def __post_init__(self):
        self.voxels = check_ndim("voxels", np.asarray(self.voxels), 3)
        if min(self.voxels.shape) < 1:
            raise ValueError(f"degenerate volume shape {self.voxels.shape}")
        check_finite("voxels", self.voxels)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or not all(
            np.isfinite(s) and s > 0 for s in self.spacing
        ):
            raise ValueError(f"spacing must be 3 positive finite values, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.voxels.shape


@dataclass
class MaskVolume:
    """Integer label field aligned to a CTVolume."""

    labels: np.ndarray
    label_semantics: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_SEMANTICS))

    def __post_init__(self):
        self.labels = check_ndim("labels", np.asarray(self.labels), 3)
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise MaskLabelError(f"labels must be integers, got dtype {self.labels.dtype}")
        present = np.unique(self.labels)
        unknown = [int(v) for v in present if int(v) not in self.label_semantics]
        if unknown:
            raise MaskLabelError(f"labels outside declared semantics: {unknown}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape


@dataclass
class SliceSample:
    """One 2D training example: k-channel slice stack plus binary center mask."""

    image: np.ndarray  # (k, H, W), values in [0, 1]
    mask: np.ndarray  # (H, W), values in {0, 1}
    volume_id: str
    slice_index: int

    def __post_init__(self):
        self.image = check_ndim("image", np.asarray(self.image), 3)
        self.mask = check_ndim("mask", np.asarray(self.mask), 2)
        check_odd("channel count k", self.image.shape[0])
        if self.image.shape[1:] != self.mask.shape:
            raise ValueError(
                f"image {self.image.shape} and mask {self.mask.shape} disagree"
            )


@dataclass(frozen=True)
class WindowSpec:
    """HU window mapped linearly onto [0, 1]."""

    hu_min: float = -200.0
    hu_max: float = 250.0

    def __post_init__(self):
        if not (np.isfinite(self.hu_min) and np.isfinite(self.hu_max)):
            raise ValueError("window bounds must be finite")
        if self.hu_min >= self.hu_max:
            raise ValueError(f"hu_min must be < hu_max, got ({self.hu_min}, {self.hu_max})")


# soft-tissue default for liver-style runs; kidney runs conventionally
# widen to (-512, 512) via config
KIDNEY_WINDOW = WindowSpec(-512.0, 512.0)


def volume_id_from_path(path: str | Path) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(name).stem


def load_volume(path: str | Path) -> CTVolume:
    """Load a NIfTI CT volume; voxels stay in scanner HU."""
    voxels, spacing = read_nifti(path)
    if voxels.ndim != 3:
        raise NonVolumeError(f"{path}: non-3D volume (ndim={voxels.ndim})")
    voxels = np.asarray(voxels, dtype=np.float32)
    if not np.isfinite(voxels).all():
        raise NonFiniteVoxelError(f"{path}: volume contains non-finite voxels")
    return CTVolume(voxels=voxels, spacing=spacing, identifier=volume_id_from_path(path))


def load_mask(
    path: str | Path,
    expected_shape: tuple[int, int, int],
    label_semantics: dict[int, str] | None = None,
) -> MaskVolume:
    """Load a NIfTI label mask and check alignment with its volume."""
    labels, _ = read_nifti(path)
    if labels.ndim != 3:
        raise NonVolumeError(f"{path}: non-3D mask (ndim={labels.ndim})")
    if labels.shape != tuple(expected_shape):
        raise MaskShapeError(
            f"{path}: shape mismatch, mask {labels.shape} vs volume {tuple(expected_shape)}"
        )
    if not np.issubdtype(labels.dtype, np.integer):
        rounded = np.rint(labels)
        if np.abs(labels - rounded).max() > 1e-6:
            raise MaskLabelError(f"{path}: mask holds non-integer values")
        labels = rounded
    labels = labels.astype(np.int16)
    semantics = dict(DEFAULT_SEMANTICS) if label_semantics is None else dict(label_semantics)
    return MaskVolume(labels=labels, label_semantics=semantics)


def window_hu(volume: CTVolume | np.ndarray, window: WindowSpec) -> np.ndarray:
    """Map HU linearly onto [0, 1], clamping outside the window."""
    voxels = volume.voxels if isinstance(volume, CTVolume) else np.asarray(volume)
    lo, hi = float(window.hu_min), float(window.hu_max)
    out = (voxels.astype(np.float32) - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def stack_indices(depth: int, index: int, k: int) -> np.ndarray:
    """Adjacent slice indices around ``index``, edges replicated."""
    half = (k - 1) // 2
    return np.clip(np.arange(index - half, index + half + 1), 0, depth - 1)


def stack_slices(windowed: np.ndarray, index: int, k: int) -> np.ndarray:
    """k-channel stack of adjacent axial slices centred on ``index``."""
    windowed = check_ndim("windowed volume", windowed, 3)
    check_odd("k", k)
    return windowed[stack_indices(windowed.shape[0], index, k)]


def extract_slices(
    windowed: np.ndarray,
    mask: MaskVolume,
    target_label: int,
    k: int,
    volume_id: str = "",
) -> list[SliceSample]:
    """One SliceSample per axial index, mask binarized on ``target_label``."""
    windowed = check_ndim("windowed volume", np.asarray(windowed), 3)
    check_odd("k", k)
    if windowed.shape != mask.shape:
        raise MaskShapeError(
            f"shape mismatch: volume {windowed.shape} vs mask {mask.shape}"
        )
    if int(target_label) not in mask.label_semantics:
        raise ValueError(f"unknown target label {target_label}")
    samples = []
    for i in range(windowed.shape[0]):
        samples.append(
            SliceSample(
                image=stack_slices(windowed, i, k),
                mask=(mask.labels[i] == target_label).astype(np.uint8),
                volume_id=volume_id,
                slice_index=i,
            )
        )
    return samples
