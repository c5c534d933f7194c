"""Regenerate the 512x512 grayscale fixture corpus from scikit-image's bundled samples.

    python scripts/make_corpus.py [out_dir]

Color samples are reduced with BT.601 luma, non-square ones are centre-cropped,
and everything is resampled to 512x512 with Lanczos.
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

from sealmark.imagecore import GrayImage, rgb_to_gray, save_image

SIDE = 512
SOURCES = [
    "camera",
    "astronaut",
    "moon",
    "grass",
    "gravel",
    "brick",
    "immunohistochemistry",
    "coffee",
    "rocket",
    "cell",
]


def to_fixture(arr: np.ndarray) -> GrayImage:
    if arr.ndim == 3:
        arr = rgb_to_gray(arr[..., :3])
    h, w = arr.shape
    side = min(h, w)
    y0, x0 = (h - side) // 2, (w - side) // 2
    arr = arr[y0 : y0 + side, x0 : x0 + side]
    if side != SIDE:
        arr = np.asarray(Image.fromarray(arr).resize((SIDE, SIDE), Image.LANCZOS))
    return GrayImage(arr)


def main(out_dir: str = "data/corpus") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in SOURCES:
        img = to_fixture(getattr(data, name)())
        save_image(img, out / f"{name}.pgm")
        print(f"{name}: {img.width}x{img.height}")


if __name__ == "__main__":
    main(*sys.argv[1:])
