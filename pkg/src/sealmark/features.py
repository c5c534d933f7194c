"""Content features: smoothed central differences, block averages and 3-bit level coding.

Pipeline for one image::

    plane = smooth(img, gaussian_kernel(3, 0.5))
    D = downsample_avg(gradient_magnitude(cfd(plane)), 16, 16)
    q = quantize_features(D, delta)          # stored levels, floor(d/delta) + 1
    p = perturbation_vector(D, delta)        # (level mod 4, lower-half flag)

Arrays are indexed ``[y, x]``; ``x`` runs along image width.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidDelta,
    InvalidKernelSpec,
    KernelLargerThanImage,
    NonDivisibleBlock,
    PlaneTooSmall,
)
from .imagecore import GrayImage

MAX_KERNEL = 31


@dataclass(frozen=True)
class GaussianKernel:
    size: int
    sigma: float
    weights: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class GradientField:
    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        if self.dx.shape != self.dy.shape:
            raise DimensionMismatch(f"dx {self.dx.shape} and dy {self.dy.shape} differ")


@dataclass(frozen=True)
class FeatureMatrix:
    """Block means of the gradient magnitude; ``values[k, m]``, k over rows."""

    values: np.ndarray
    s: int
    t: int

    @property
    def n(self) -> int:
        return self.values.size

    def vector(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class QuantizedFeatures:
    delta: float
    levels: np.ndarray

    @property
    def n(self) -> int:
        return self.levels.size


@dataclass(frozen=True)
class PerturbationVector:
    """One (p1, p2, p3) triple per feature; p1 is the high bit of level mod 4."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 2 or bits.shape[1] != 3:
            raise DimensionMismatch(f"perturbation bits must be (N, 3), got {bits.shape}")
        if np.any(bits > 1):
            raise ValueError("perturbation bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def residues(self) -> np.ndarray:
        return (2 * self.bits[:, 0] + self.bits[:, 1]).astype(np.int64)

    @property
    def lower_half(self) -> np.ndarray:
        return self.bits[:, 2]

    def flatten(self) -> np.ndarray:
        return self.bits.reshape(-1).copy()

    @classmethod
    def from_flat(cls, bits) -> "PerturbationVector":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size % 3:
            raise DimensionMismatch("flat perturbation length must be a multiple of 3")
        return cls(bits.reshape(-1, 3))


@dataclass(frozen=True)
class Recovery:
    """Recovered levels plus diagnostics from the correction step."""

    features: QuantizedFeatures
    alpha: np.ndarray
    p3_violations: int


def gaussian_kernel(n: int = 3, sigma: float = 0.5) -> GaussianKernel:
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_KERNEL or n % 2 == 0:
        raise InvalidKernelSpec(f"kernel size must be odd and in [1, {MAX_KERNEL}], got {n!r}")
    if not sigma > 0 or not np.isfinite(sigma):
        raise InvalidKernelSpec(f"sigma must be positive, got {sigma!r}")
    c = (n - 1) / 2
    r = np.arange(n) - c
    w = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma**2))
    w /= w.sum()
    w.flags.writeable = False
    return GaussianKernel(int(n), float(sigma), w)


def smooth(img: GrayImage | np.ndarray, k: GaussianKernel) -> np.ndarray:
    """Convolve with ``k`` using replicate-edge extension; output has the input's shape."""
    src = img.as_float() if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    h, w = src.shape
    if k.size > min(h, w):
        raise KernelLargerThanImage(f"{k.size}x{k.size} kernel does not fit a {w}x{h} image")
    c = k.size // 2
    if c == 0:
        return src * k.weights[0, 0]
    padded = np.pad(src, c, mode="edge")
    out = np.zeros_like(src)
    # kernel is centro-symmetric so correlation and convolution coincide
    for i in range(k.size):
        for j in range(k.size):
            out += k.weights[i, j] * padded[i : i + h, j : j + w]
    return out


def cfd(plane: np.ndarray) -> GradientField:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or min(plane.shape) < 3:
        raise PlaneTooSmall(f"central differences need at least 3x3 samples, got {plane.shape}")
    p = np.pad(plane, 1, mode="edge")
    dx = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    dy = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    return GradientField(dx, dy)


def gradient_magnitude(g: GradientField) -> np.ndarray:
    return np.sqrt(g.dx * g.dx + g.dy * g.dy)


def downsample_avg(G: np.ndarray, s: int, t: int) -> FeatureMatrix:
    """Mean over non-overlapping blocks ``t`` rows high and ``s`` columns wide."""
    G = np.asarray(G, dtype=np.float64)
    h, w = G.shape
    if s < 1 or t < 1 or w % s or h % t:
        raise NonDivisibleBlock(f"block {s}x{t} does not tile a {w}x{h} plane")
    sums = G.reshape(h // t, t, w // s, s).sum(axis=(1, 3))
    return FeatureMatrix(sums / (s * t), int(s), int(t))


def feature_matrix(img: GrayImage, kernel: GaussianKernel, s: int, t: int) -> FeatureMatrix:
    return downsample_avg(gradient_magnitude(cfd(smooth(img, kernel))), s, t)


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not delta > 0 or not np.isfinite(delta):
        raise InvalidDelta(f"quantization step must be positive, got {delta!r}")
    return delta


def raw_levels(d: np.ndarray, delta: float) -> np.ndarray:
    """Cell index floor(d / delta) of each feature."""
    return np.floor(np.asarray(d, dtype=np.float64) / delta).astype(np.int64)


def quantize_features(D: FeatureMatrix, delta: float) -> QuantizedFeatures:
    delta = _check_delta(delta)
    return QuantizedFeatures(delta, raw_levels(D.vector(), delta) + 1)


def perturbation_vector(D: FeatureMatrix, delta: float) -> PerturbationVector:
    delta = _check_delta(delta)
    ratio = D.vector() / delta
    q = np.floor(ratio).astype(np.int64)
    residue = q % 4
    lower = (ratio - q) < 0.5
    bits = np.stack([residue >> 1, residue & 1, lower.astype(np.int64)], axis=1)
    return PerturbationVector(bits.astype(np.uint8))


def recover_features(corrupted: FeatureMatrix, extracted: PerturbationVector, delta: float) -> Recovery:
    """Undo single-level drifts of the received features using the embedded residues.

    The mod-4 residue of each received level is compared with the embedded
    one: one step below means the value fell into the previous cell (add one
    level back), one step above means it rose into the next cell (remove one);
    anything else is left alone. Exact whenever no feature moved by more than
    one level.
    """
    delta = _check_delta(delta)
    if corrupted.n != extracted.n:
        raise DimensionMismatch(f"{corrupted.n} features but {extracted.n} perturbation triples")
    current = perturbation_vector(corrupted, delta)
    q = raw_levels(corrupted.vector(), delta)
    cur_res = current.residues
    emb_res = extracted.residues

    alpha = np.full(q.shape, 2, dtype=np.int64)
    alpha[cur_res == (emb_res - 1) % 4] = 0
    alpha[cur_res == (emb_res + 1) % 4] = 1
    # integer form of floor((d +/- delta) / delta); immune to round-off at cell edges
    q = q + np.where(alpha == 0, 1, 0) - np.where(alpha == 1, 1, 0)

    # cases the half-cell bits alone would have left uncorrected
    emb_p3 = extracted.lower_half
    cur_p3 = current.lower_half
    literal_skip = ((alpha == 0) & (emb_p3 == 1) & (cur_p3 == 0)) | ((alpha == 1) & (emb_p3 == 0) & (cur_p3 == 1))
    return Recovery(
        QuantizedFeatures(delta, np.maximum(q, 0) + 1),
        alpha,
        int(literal_skip.sum()),
    )


def feature_distance(a: QuantizedFeatures, b: QuantizedFeatures) -> int:
    if a.n != b.n:
        raise DimensionMismatch(f"feature lengths differ: {a.n} vs {b.n}")
    if a.delta != b.delta:
        raise DimensionMismatch(f"quantization steps differ: {a.delta} vs {b.delta}")
    if a.n == 0:
        return 0
    return int(np.max(np.abs(a.levels.astype(np.int64) - b.levels.astype(np.int64))))
