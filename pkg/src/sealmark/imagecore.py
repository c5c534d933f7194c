"""Grayscale rasters, codec adapters and power-of-two padding."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import CodecUnavailable, CorruptFile, ImageTooSmall, IoError, UnsupportedFormat

# ITU-R BT.601 luma weights
BT601 = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit luminance raster, indexed ``pixels[y, x]``."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("luminance values must lie in [0, 255]")
            if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
                raise ValueError("luminance values must be integers")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.shape, self.pixels.tobytes()))


def finalize_pixels(plane: np.ndarray) -> GrayImage:
    """Round half away from zero and clip a real plane into an 8-bit image."""
    plane = np.asarray(plane, dtype=np.float64)
    rounded = np.sign(plane) * np.floor(np.abs(plane) + 0.5)
    return GrayImage(np.clip(rounded, 0, 255).astype(np.uint8))


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    y = rgb[..., 0] * BT601[0] + rgb[..., 1] * BT601[1] + rgb[..., 2] * BT601[2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# PGM


def _pgm_tokens(data: bytes, count: int, pos: int) -> tuple[list[int], int]:
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise CorruptFile("malformed PGM header")
        tokens.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos : pos + 1].isspace():
        raise CorruptFile("malformed PGM header")
    return tokens, pos + 1


def decode_pgm(data: bytes) -> GrayImage:
    if data[:2] != b"P5":
        raise UnsupportedFormat("not a binary PGM (P5) stream")
    (width, height, maxval), offset = _pgm_tokens(data, 3, 2)
    if width <= 0 or height <= 0:
        raise CorruptFile("PGM dimensions must be positive")
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 is supported, got {maxval}")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise CorruptFile(f"PGM raster truncated: {len(raster)} of {width * height} bytes")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def encode_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


# ---------------------------------------------------------------------------
# codec adapters


class Codec(Protocol):
    name: str

    def decode_bytes(self, data: bytes) -> GrayImage: ...

    def encode(self, img: GrayImage, quality: int | None = None) -> bytes: ...


class PgmCodec:
    name = "pgm"

    def decode_bytes(self, data: bytes) -> GrayImage:
        return decode_pgm(data)

    def encode(self, img: GrayImage, quality: int | None = None) -> bytes:
        return encode_pgm(img)


class PillowCodec:
    """PNG/JPEG through Pillow. Color inputs collapse to BT.601 luma."""

    def __init__(self, fmt: str):
        self.fmt = fmt.upper()
        self.name = f"pillow-{fmt.lower()}"

    def decode_bytes(self, data: bytes) -> GrayImage:
        from PIL import Image, UnidentifiedImageError

        try:
            with Image.open(io.BytesIO(data)) as im:
                im.load()
                return _pil_to_gray(im)
        except UnidentifiedImageError as exc:
            raise CorruptFile(str(exc)) from exc
        except (OSError, SyntaxError) as exc:
            raise CorruptFile(str(exc)) from exc

    def encode(self, img: GrayImage, quality: int | None = None) -> bytes:
        from PIL import Image

        buf = io.BytesIO()
        im = Image.fromarray(np.ascontiguousarray(img.pixels))
        if self.fmt == "JPEG":
            im.save(buf, format="JPEG", quality=90 if quality is None else int(quality))
        else:
            im.save(buf, format=self.fmt)
        return buf.getvalue()


def _pil_to_gray(im) -> GrayImage:
    if im.mode == "L":
        return GrayImage(np.asarray(im, dtype=np.uint8))
    if im.mode in ("1", "P", "LA", "PA", "RGBA", "CMYK", "YCbCr", "RGB"):
        if im.mode == "LA":
            return GrayImage(np.asarray(im.convert("L"), dtype=np.uint8))
        return GrayImage(rgb_to_gray(np.asarray(im.convert("RGB"))))
    raise UnsupportedFormat(f"unsupported pixel mode {im.mode!r} (8-bit only)")


class OpenCvJpegCodec:
    name = "opencv-jpeg"

    def __init__(self):
        try:
            import cv2  # noqa: F401
        except ImportError as exc:
            raise CodecUnavailable("opencv is not installed") from exc

    def decode_bytes(self, data: bytes) -> GrayImage:
        import cv2

        arr = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_GRAYSCALE)
        if arr is None:
            raise CorruptFile("opencv could not decode the stream")
        return GrayImage(arr)

    def encode(self, img: GrayImage, quality: int | None = None) -> bytes:
        import cv2

        q = 90 if quality is None else int(quality)
        ok, buf = cv2.imencode(".jpg", np.ascontiguousarray(img.pixels), [cv2.IMWRITE_JPEG_QUALITY, q])
        if not ok:
            raise CodecUnavailable("opencv JPEG encoder failed")
        return buf.tobytes()


class Jpeg2000Codec:
    """Placeholder slot; JPEG2000 experiments are not shipped."""

    name = "jpeg2000"

    def decode_bytes(self, data: bytes) -> GrayImage:
        raise CodecUnavailable("no JPEG2000 adapter is registered")

    def encode(self, img: GrayImage, quality: int | None = None) -> bytes:
        raise CodecUnavailable("no JPEG2000 adapter is registered")


_JPEG_ADAPTERS = {"pillow": lambda: PillowCodec("jpeg"), "opencv": OpenCvJpegCodec}


def jpeg_codec(name: str | None = None) -> Codec:
    """JPEG adapter chosen by ``name`` or the ``SEALMARK_CODEC`` env var."""
    name = (name or os.environ.get("SEALMARK_CODEC") or "pillow").lower()
    try:
        factory = _JPEG_ADAPTERS[name]
    except KeyError:
        raise CodecUnavailable(f"unknown JPEG adapter {name!r}; choose from {sorted(_JPEG_ADAPTERS)}") from None
    return factory()


def codec_for_path(path: str | os.PathLike) -> Codec:
    ext = Path(path).suffix.lower()
    if ext in (".pgm", ".pnm"):
        return PgmCodec()
    if ext == ".png":
        return PillowCodec("png")
    if ext in (".jpg", ".jpeg"):
        return jpeg_codec()
    if ext in (".jp2", ".j2k"):
        return Jpeg2000Codec()
    raise UnsupportedFormat(f"no codec registered for {ext or 'extension-less'} files")


def load_image(path: str | os.PathLike) -> GrayImage:
    codec = codec_for_path(path)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return codec.decode_bytes(data)


def save_image(img: GrayImage, path: str | os.PathLike, quality: int | None = None) -> None:
    data = codec_for_path(path).encode(img, quality)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# geometry

MIN_SIDE = 8


def pad_to_square_pow2(img: GrayImage) -> GrayImage:
    if img.width < MIN_SIDE or img.height < MIN_SIDE:
        raise ImageTooSmall(f"image {img.width}x{img.height} is below the {MIN_SIDE}x{MIN_SIDE} minimum")
    side = 1 << (max(img.width, img.height) - 1).bit_length()
    if img.width == side and img.height == side:
        return img
    out = np.zeros((side, side), dtype=np.uint8)
    out[: img.height, : img.width] = img.pixels
    return GrayImage(out)


def crop(img: GrayImage, width: int, height: int) -> GrayImage:
    """Inverse of padding: keep the top-left ``width`` x ``height`` window."""
    return GrayImage(img.pixels[:height, :width])
