#!/usr/bin/env python3
"""Regenerate the bundled target images in data/images.

Three photographs from scikit-image's sample data (camera, astronaut, rocket; reduced to
luma and centre-cropped to a square) and three procedural test patterns (Siemens star,
zone plate, graded checkerboard). Output is 8-bit sRGB-encoded grayscale PNG.

    python3 tools/make_targets.py --size 256 --out data/images
"""

import argparse
import pathlib

import numpy as np
from PIL import Image
from skimage import color, data


def srgb_encode(v):
    v = np.clip(v, 0.0, 1.0)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * np.power(v, 1 / 2.4) - 0.055)


def square_crop(img):
    h, w = img.shape[:2]
    s = min(h, w)
    y0, x0 = (h - s) // 2, (w - s) // 2
    return img[y0:y0 + s, x0:x0 + s]


def photo(img, size):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])  # luma of the encoded values, float in [0, 1]
    else:
        img = img.astype(np.float64) / 255.0
    img = square_crop(img)
    pil = Image.fromarray(np.round(img * 255).astype(np.uint8))
    return np.asarray(pil.resize((size, size), Image.BOX), dtype=np.float64) / 255.0


def supersampled(size, fn, ss=4):
    # pixel centres at integer coordinates, origin at the image centre
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    x -= size // 2
    y -= size // 2
    acc = np.zeros((size, size))
    for dy in offs:
        for dx in offs:
            acc += fn(x + dx, y + dy)
    return acc / (ss * ss)


def siemens_star(size, spokes=36):
    radius = 0.47 * size

    def fn(x, y):
        theta = np.arctan2(y, x)
        r = np.hypot(x, y)
        star = (np.sin(spokes * theta) > 0).astype(np.float64) * 0.9 + 0.05
        return np.where(r <= radius, star, 0.5)

    return srgb_encode(supersampled(size, fn))


def zone_plate(size, max_freq=0.35):
    rmax = np.hypot(size / 2, size / 2)

    def fn(x, y):
        r2 = x * x + y * y
        return 0.5 + 0.45 * np.cos(np.pi * max_freq * r2 / rmax)

    return srgb_encode(supersampled(size, fn))


def graded_checkerboard(size, cells=8):
    y, x = np.mgrid[0:size, 0:size]
    cell = size / cells
    cx = np.floor(x / cell)
    cy = np.floor(y / cell)
    ramp = 0.1 + 0.8 * (x + 0.5) / size
    parity = (cx + cy) % 2
    lin = np.where(parity == 0, ramp, 1.0 - ramp) * (0.6 + 0.4 * (y + 0.5) / size)
    return srgb_encode(lin)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/images"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    images = {
        "camera": photo(data.camera(), args.size),
        "astronaut": photo(data.astronaut(), args.size),
        "rocket": photo(data.rocket(), args.size),
        "siemens_star": siemens_star(args.size),
        "zone_plate": zone_plate(args.size),
        "checkerboard": graded_checkerboard(args.size),
    }
    for name, img in images.items():
        path = args.out / f"{name}.png"
        Image.fromarray(np.round(np.clip(img, 0, 1) * 255).astype(np.uint8), mode="L").save(path, optimize=True)
        print(path)


if __name__ == "__main__":
    main()
