"""Spatial smoothing of threshold maps with small symmetric kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BOUNDARY_POLICIES, KERNEL_KINDS, DecoderConfig
from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class SmoothingKernel:
    """Normalized symmetric kernel of ``2 * radius + 1`` taps."""

    kind: str
    radius: int
    weights: np.ndarray
    sigma: float | None = None


def build_kernel(kind: str, radius: int, sigma: float | None = None) -> SmoothingKernel:
    """Construct a normalized kernel.

    ``gaussian`` weights follow exp(-u^2 / (2 sigma^2)) truncated at
    |u| <= radius and renormalized; ``mean`` is uniform; ``triangular``
    decays linearly to the edge, weight (radius + 1 - |u|) before
    normalization. All weights are strictly positive and sum to 1.
    """
    if kind not in KERNEL_KINDS:
        raise ConfigError(f"unknown kernel {kind!r}")
    if radius < 0:
        raise ConfigError(f"radius must be >= 0, got {radius}")
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    if kind == "gaussian":
        if sigma is None or sigma <= 0.0:
            raise ConfigError(f"gaussian kernel needs sigma > 0, got {sigma}")
        weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    elif kind == "mean":
        weights = np.ones_like(offsets)
    else:
        weights = (radius + 1) - np.abs(offsets)
    weights = weights / weights.sum()
    return SmoothingKernel(
        kind=kind,
        radius=radius,
        weights=weights,
        sigma=sigma if kind == "gaussian" else None,
    )


def kernel_from_config(cfg: DecoderConfig) -> SmoothingKernel:
    return build_kernel(cfg.kernel, cfg.radius, cfg.sigma)


def smooth(values: np.ndarray, kernel: SmoothingKernel, boundary: str = "replicate") -> np.ndarray:
    """Convolve ``values`` with the kernel under a boundary extension.

    ``replicate`` extends edge values outward; ``reflect`` mirrors the
    interior without repeating the edge sample. Output has the same length
    as the input.
    """
    if boundary not in BOUNDARY_POLICIES:
        raise ConfigError(f"unknown boundary policy {boundary!r}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ConfigError("smooth expects a non-empty 1-D array")
    if kernel.radius == 0 or values.size == 1:
        # Constant extension of a single sample (or a 1-tap kernel) is exact.
        return values.copy()
    mode = "edge" if boundary == "replicate" else "reflect"
    padded = np.pad(values, kernel.radius, mode=mode)
    return np.convolve(padded, kernel.weights[::-1], mode="valid")
