"""Dense float64 substrate shared by the attention, vision and loss modules.

A "feature matrix" is a 2-D, finite, float64 numpy array of shape
``(tokens, dim)``. Functions here validate at the boundary and never
mutate their inputs.
"""
from __future__ import annotations

import enum

import numpy as np

__all__ = [
    "CogfuseError",
    "InvalidInputError",
    "ShapeError",
    "ConfigError",
    "KernelKind",
    "as_feature_matrix",
    "apply_kernel",
    "feature_map",
    "matmul",
    "row_softmax",
    "log_softmax",
    "seeded_random_matrix",
    "rng_from_seed",
    "max_rel_dev",
]


class CogfuseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(CogfuseError, ValueError):
    """Input values violate a precondition (non-finite, out of range, ...)."""


class ShapeError(CogfuseError, ValueError):
    """Array shapes do not conform."""


class ConfigError(CogfuseError, ValueError):
    """A configuration object is internally inconsistent."""


class KernelKind(str, enum.Enum):
    """Feature map applied to queries and keys before the dot product."""

    IDENTITY = "identity"
    RELU = "relu"
    ELU_PLUS_ONE = "elu1"

    @classmethod
    def parse(cls, value: "KernelKind | str") -> "KernelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown kernel {value!r}; expected one of {names}") from None


def as_feature_matrix(x, name: str = "x") -> np.ndarray:
    """Validate ``x`` as a finite 2-D float64 array with at least one row and column."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _check_finite(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite values")


def apply_kernel(x, kernel: KernelKind | str = KernelKind.IDENTITY) -> np.ndarray:
    """Apply the feature map elementwise; works on arrays of any rank."""
    arr = np.asarray(x, dtype=np.float64)
    _check_finite(arr, "kernel input")
    return feature_map(arr, KernelKind.parse(kernel))


def feature_map(arr: np.ndarray, kernel: KernelKind) -> np.ndarray:
    """:func:`apply_kernel` without input checks, for already validated arrays."""
    if kernel is KernelKind.IDENTITY:
        return arr
    if kernel is KernelKind.RELU:
        return np.maximum(arr, 0.0)
    # elu(x) + 1 == exp(x) for x <= 0, x + 1 otherwise
    return np.where(arr > 0.0, arr + 1.0, np.exp(np.minimum(arr, 0.0)))


def matmul(a, b) -> np.ndarray:
    a = as_feature_matrix(a, "a")
    b = as_feature_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def row_softmax(x) -> np.ndarray:
    """Softmax along the last axis, with max subtraction."""
    arr = np.asarray(x, dtype=np.float64)
    _check_finite(arr, "softmax input")
    shifted = arr - arr.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    _check_finite(arr, "log_softmax input")
    shifted = arr - arr.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def rng_from_seed(seed: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(np.random.PCG64(int(seed)))


def seeded_random_matrix(rows: int, cols: int, seed: int) -> np.ndarray:
    """Standard-normal ``rows x cols`` matrix, bit-identical for a given seed."""
    if rows < 1 or cols < 1:
        raise ShapeError(f"rows and cols must be >= 1, got ({rows}, {cols})")
    return rng_from_seed(seed).standard_normal((rows, cols))


def max_rel_dev(actual, expected) -> float:
    """Largest absolute difference, relative to the largest magnitude in ``expected``."""
    a = np.asarray(actual, dtype=np.float64)
    b = np.asarray(expected, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    scale = float(np.max(np.abs(b)))
    diff = float(np.max(np.abs(a - b)))
    if scale == 0.0:
        return diff
    return diff / scale
