"""Three-level 2-D Haar pyramid and quantization-index-modulation in HL3/LH3.

Coefficients use the nested quadrant layout: after each level the
approximation sits in the top-left quadrant, HL (horizontal detail) top-right,
LH bottom-left and HH bottom-right.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGamma, InvalidSize, NotPowerOfTwo, PayloadSizeMismatch, TooManyLevels
from .imagecore import GrayImage, finalize_pixels

SQRT_HALF = np.sqrt(0.5)
EMBED_BANDS = ("HL3", "LH3")


class SubbandId(str, enum.Enum):
    LL3 = "LL3"
    HL3 = "HL3"
    LH3 = "LH3"
    HH3 = "HH3"
    HL2 = "HL2"
    LH2 = "LH2"
    HH2 = "HH2"
    HL1 = "HL1"
    LH1 = "LH1"
    HH1 = "HH1"


@dataclass(frozen=True, eq=False)
class WaveletPyramid:
    coeffs: np.ndarray
    levels: int = 3

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]

    def band(self, sid: SubbandId | str) -> np.ndarray:
        (r0, r1), (c0, c1) = subband_rect(self.size, SubbandId(sid))
        return self.coeffs[r0:r1, c0:c1]


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _haar_rows(a: np.ndarray) -> np.ndarray:
    """One analysis step along axis 0: pairwise sums on top, differences below."""
    even, odd = a[0::2], a[1::2]
    return np.concatenate([(even + odd) * SQRT_HALF, (even - odd) * SQRT_HALF], axis=0)


def _ihaar_rows(a: np.ndarray) -> np.ndarray:
    half = a.shape[0] // 2
    lo, hi = a[:half], a[half:]
    out = np.empty_like(a)
    out[0::2] = (lo + hi) * SQRT_HALF
    out[1::2] = (lo - hi) * SQRT_HALF
    return out


def hwt_forward(img: GrayImage | np.ndarray, levels: int = 3) -> WaveletPyramid:
    a = img.as_float() if isinstance(img, GrayImage) else np.array(img, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not _is_pow2(a.shape[0]):
        raise NotPowerOfTwo(f"input must be a square power-of-two plane, got {a.shape}")
    if levels < 1 or a.shape[0] >> levels == 0:
        raise TooManyLevels(f"{levels} levels do not fit a {a.shape[0]}x{a.shape[0]} plane")
    n = a.shape[0]
    for _ in range(levels):
        block = a[:n, :n]
        a[:n, :n] = _haar_rows(_haar_rows(block).T).T
        n //= 2
    return WaveletPyramid(a, levels)


def hwt_inverse(pyr: WaveletPyramid) -> np.ndarray:
    a = np.array(pyr.coeffs, dtype=np.float64)
    n = pyr.size >> (pyr.levels - 1)
    for _ in range(pyr.levels):
        block = a[:n, :n]
        a[:n, :n] = _ihaar_rows(_ihaar_rows(block.T).T)
        n *= 2
    return a


def subband_rect(size: int, sid: SubbandId) -> tuple[tuple[int, int], tuple[int, int]]:
    """Row and column half-open ranges of ``sid`` in a 3-level pyramid of side ``size``."""
    if not _is_pow2(size) or size < 8:
        raise InvalidSize(f"a 3-level pyramid needs a power-of-two side >= 8, got {size}")
    sid = SubbandId(sid)
    if sid is SubbandId.LL3:
        b = size >> 3
        return (0, b), (0, b)
    level = int(sid.value[-1])
    b = size >> level
    kind = sid.value[:2]
    rows = (0, b) if kind == "HL" else (b, 2 * b)
    cols = (0, b) if kind == "LH" else (b, 2 * b)
    return rows, cols


def subband_indices(size: int, sid: SubbandId | str) -> np.ndarray:
    """Row-major ``(row, col)`` coordinates of a subband, shape ``(count, 2)``."""
    (r0, r1), (c0, c1) = subband_rect(size, SubbandId(sid))
    rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def embed_positions(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index arrays in payload order: HL3 then LH3, each row-major."""
    idx = np.concatenate([subband_indices(size, b) for b in EMBED_BANDS])
    return idx[:, 0], idx[:, 1]


def capacity(size: int) -> int:
    return 2 * (size >> 3) ** 2


def round_half_away(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma > 0 or not np.isfinite(gamma):
        raise InvalidGamma(f"gamma must be positive, got {gamma!r}")
    return gamma


def qim_embed_values(values: np.ndarray, bits: np.ndarray, gamma: float) -> np.ndarray:
    gamma = _check_gamma(gamma)
    offset = np.where(np.asarray(bits) == 1, 0.25, -0.25)
    return gamma * (round_half_away(np.asarray(values) / gamma) + offset)


def qim_extract_values(values: np.ndarray, gamma: float) -> np.ndarray:
    gamma = _check_gamma(gamma)
    values = np.asarray(values, dtype=np.float64)
    return (values - gamma * round_half_away(values / gamma) >= 0).astype(np.uint8)


def qim_residuals(pyr: WaveletPyramid, gamma: float) -> np.ndarray:
    """Signed offset of each carrier coefficient from its quantizer centre."""
    gamma = _check_gamma(gamma)
    vals = pyr.coeffs[embed_positions(pyr.size)]
    return vals - gamma * round_half_away(vals / gamma)


def qim_embed(pyr: WaveletPyramid, bits, gamma: float) -> WaveletPyramid:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    gamma = _check_gamma(gamma)
    if pyr.size < 8 or pyr.levels != 3:
        raise InvalidSize("embedding needs a 3-level pyramid")
    pos = embed_positions(pyr.size)
    if bits.size != pos[0].size:
        raise PayloadSizeMismatch(f"{bits.size} bits for {pos[0].size} carrier coefficients")
    out = pyr.coeffs.copy()
    out[pos] = qim_embed_values(out[pos], bits, gamma)
    return WaveletPyramid(out, pyr.levels)


def qim_extract(pyr: WaveletPyramid, gamma: float) -> np.ndarray:
    gamma = _check_gamma(gamma)
    return qim_extract_values(pyr.coeffs[embed_positions(pyr.size)], gamma)


# ---------------------------------------------------------------------------
# 8-bit finalization

# 8x8 ordered-dither ranks; spreads integer corrections evenly over a block
_BAYER8 = np.array(
    [
        [0, 32, 8, 40, 2, 34, 10, 42],
        [48, 16, 56, 24, 50, 18, 58, 26],
        [12, 44, 4, 36, 14, 46, 6, 38],
        [60, 28, 52, 20, 62, 30, 54, 22],
        [3, 35, 11, 43, 1, 33, 9, 41],
        [51, 19, 59, 27, 49, 17, 57, 25],
        [15, 47, 7, 39, 13, 45, 5, 37],
        [63, 31, 55, 23, 61, 29, 53, 21],
    ]
)
_TOP = np.arange(8)[:, None] < 4
_LEFT = np.arange(8)[None, :] < 4
# HL3 = (A + C - B - D) / 8 and LH3 = (A + B - C - D) / 8 over quadrants
# A (top-left), B (top-right), C (bottom-left), D (bottom-right)
_PAIR_AD = np.where(_TOP & _LEFT, 1, np.where(~_TOP & ~_LEFT, -1, 0))
_PAIR_CB = np.where(~_TOP & _LEFT, 1, np.where(_TOP & ~_LEFT, -1, 0))


def _blocks(a: np.ndarray) -> np.ndarray:
    n = a.shape[0] // 8
    return a.reshape(n, 8, n, 8).transpose(0, 2, 1, 3)


def _unblocks(b: np.ndarray) -> np.ndarray:
    n = b.shape[0]
    return b.transpose(0, 2, 1, 3).reshape(n * 8, n * 8)


def _spread(pixels: np.ndarray, pattern: np.ndarray, units: np.ndarray) -> np.ndarray:
    """Integer increments realising ``units`` steps along ``pattern`` in every block.

    Only pixels that can move in the required direction without leaving
    [0, 255] take part; units are dealt round-robin in dither order.
    """
    direction = np.sign(units)[..., None, None] * pattern
    room = np.where(direction > 0, 255 - pixels, np.where(direction < 0, pixels, 0))
    eligible = room > 0
    count = eligible.sum(axis=(2, 3))
    need = np.abs(units)
    base = np.where(count > 0, need // np.maximum(count, 1), 0)
    extra = np.where(count > 0, need % np.maximum(count, 1), 0)
    # rank of each eligible pixel among eligible pixels of its block, in dither order
    order = np.argsort(_BAYER8.ravel())
    flat = eligible.reshape(*eligible.shape[:2], 64)[..., order]
    rank_sorted = np.cumsum(flat, axis=-1) - 1
    rank = np.empty_like(rank_sorted)
    rank[..., order] = rank_sorted
    rank = rank.reshape(eligible.shape)
    amount = base[..., None, None] + (rank < extra[..., None, None])
    amount = np.minimum(np.where(eligible, amount, 0), room)
    return direction * amount


def finalize_carriers(plane: np.ndarray, target: WaveletPyramid, rounds: int = 3) -> GrayImage:
    """Round ``plane`` to 8 bits, then nudge pixels so HL3/LH3 land back on ``target``.

    Plain rounding erases level-3 detail changes smaller than four units,
    because each one is spread over an 8x8 block at 1/8 amplitude. The
    correction moves whole pixel units inside each block so that both carrier
    coefficients of the block return to within 1/8 of their targets; other
    subbands absorb the difference.
    """
    img = finalize_pixels(plane)
    size = target.size
    if size < 8:
        return img
    b = size >> 3
    want_h = target.coeffs[:b, b : 2 * b]
    want_v = target.coeffs[b : 2 * b, :b]
    pixels = img.pixels.astype(np.int64)
    for _ in range(rounds):
        blocks = _blocks(pixels)
        got = hwt_forward(pixels.astype(np.float64), 3).coeffs
        a = np.rint(8.0 * (want_h - got[:b, b : 2 * b])).astype(np.int64)
        c = np.rint(8.0 * (want_v - got[b : 2 * b, :b])).astype(np.int64)
        if not (a.any() or c.any()):
            break
        k1 = np.trunc((a + c) / 2).astype(np.int64)
        k2 = np.trunc((a - c) / 2).astype(np.int64)
        step = _spread(blocks, _PAIR_AD, k1)
        blocks = blocks + step
        blocks = blocks + _spread(blocks, _PAIR_CB, k2)
        pixels = _unblocks(blocks)
    return GrayImage(pixels.astype(np.uint8))
