"""Input validation helpers shared across the toolkit."""

from __future__ import annotations

import numpy as np


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_ndim(name: str, arr: np.ndarray, ndim: int) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}D, got shape {arr.shape}")
    return arr


def check_same_shape(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ValueError(
            f"shape mismatch: {name_a} {np.shape(a)} vs {name_b} {np.shape(b)}"
        )


def check_binary(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be binary (values in {{0, 1}})")
    return arr


def check_unit_interval(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_odd(name: str, value: int) -> int:
    if value < 1 or value % 2 == 0:
        raise ValueError(f"{name} must be a positive odd integer, got {value}")
    return value


def check_positive(name: str, value: float) -> float:
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def check_fraction(name: str, value: float, lo: float = 0.0, hi: float = 1.0) -> float:
    if not lo <= value <= hi:
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return value


def check_divisible(name: str, value: int, divisor: int) -> int:
    if value % divisor != 0:
        raise ValueError(f"{name}={value} is not a multiple of {divisor}")
    return value
