"""Cut the grayscale test corpora used by the Rust test suites.

Crops come from the sample photographs bundled with scikit-image, so the
fixtures can be regenerated offline:

    python3 python/make_fixtures.py crates/core/tests/data
"""

import pathlib
import sys

import numpy as np
from skimage import data
from skimage.color import rgb2gray

SOURCES = [
    "camera", "astronaut", "coffee", "chelsea", "coins", "moon",
    "rocket", "hubble_deep_field", "brick", "grass", "gravel", "cell",
]
SIZE = 128
# (subdirectory, number of crops, rng seed)
SPLITS = [("desk", 6, 1), ("train", 30, 2), ("heldout", 6, 3)]


def gray(name):
    img = getattr(data, name)()
    if isinstance(img, tuple):
        img = img[0]
    if img.ndim == 3:
        img = rgb2gray(img[..., :3]) * 255.0
    elif img.dtype != np.uint8:
        img = img.astype(np.float64) / img.max() * 255.0
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_pgm(path, img):
    h, w = img.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())


def main(out_root):
    images = {name: gray(name) for name in SOURCES}
    for split, count, seed in SPLITS:
        rng = np.random.default_rng(seed)
        out = pathlib.Path(out_root) / split
        out.mkdir(parents=True, exist_ok=True)
        made = 0
        while made < count:
            name = SOURCES[(made + seed) % len(SOURCES)]
            img = images[name]
            y = int(rng.integers(0, img.shape[0] - SIZE + 1))
            x = int(rng.integers(0, img.shape[1] - SIZE + 1))
            crop = img[y:y + SIZE, x:x + SIZE]
            # Skip nearly flat crops; they carry no texture to learn from.
            if crop.std() < 20.0:
                continue
            write_pgm(out / f"{split}{made:02d}_{name}.pgm", crop)
            made += 1


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/data")
