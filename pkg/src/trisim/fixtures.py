"""Deterministic synthetic digit corpus for demos and offline testing.

Renders the glyphs 0-9 with the DejaVu font family bundled with matplotlib,
at randomized size, placement, rotation, stroke intensity and pixel noise,
and writes the result as standard IDX files under the usual MNIST file names.
It exists so the training pipeline can be exercised end to end on machines
that do not have the real handwritten-digit files; it is not a dataset loader.
"""

import os

import numpy as np

from .data import Dataset, save_idx

IMAGE_SIZE = 28

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


def _font_files():
    import matplotlib

    font_dir = os.path.join(os.path.dirname(matplotlib.__file__),
                            "mpl-data", "fonts", "ttf")
    names = [
        "DejaVuSans.ttf", "DejaVuSans-Bold.ttf", "DejaVuSans-Oblique.ttf",
        "DejaVuSerif.ttf", "DejaVuSerif-Bold.ttf", "DejaVuSerif-Italic.ttf",
        "DejaVuSansMono.ttf", "DejaVuSansMono-Bold.ttf",
    ]
    paths = [os.path.join(font_dir, n) for n in names]
    return [p for p in paths if os.path.exists(p)]


def _load_fonts():
    from PIL import ImageFont

    fonts = []
    for path in _font_files():
        for size in (16, 18, 20, 22):
            fonts.append(ImageFont.truetype(path, size))
    if not fonts:
        raise RuntimeError("no DejaVu fonts found; cannot render digits")
    return fonts


def render_digit(digit, rng, fonts):
    """One 28x28 uint8 image of ``digit`` with randomized nuisance factors."""
    from PIL import Image, ImageDraw

    font = fonts[rng.integers(0, len(fonts))]
    img = Image.new("L", (IMAGE_SIZE, IMAGE_SIZE), 0)
    draw = ImageDraw.Draw(img)
    x0, y0, x1, y1 = draw.textbbox((0, 0), str(digit), font=font)
    cx = (IMAGE_SIZE - (x1 - x0)) / 2 - x0 + rng.uniform(-2.5, 2.5)
    cy = (IMAGE_SIZE - (y1 - y0)) / 2 - y0 + rng.uniform(-2.5, 2.5)
    draw.text((cx, cy), str(digit), fill=255, font=font)
    angle = rng.uniform(-14.0, 14.0)
    img = img.rotate(angle, resample=Image.BILINEAR, fillcolor=0)
    arr = np.asarray(img, dtype=np.float64)
    arr *= rng.uniform(0.65, 1.0)
    arr += rng.normal(0.0, 6.0, arr.shape)
    return np.clip(arr, 0, 255).astype(np.uint8)


def make_digit_dataset(per_class, seed=0, provenance="train") -> Dataset:
    """Class-balanced rendered corpus, shuffled deterministically."""
    rng = np.random.default_rng(seed)
    fonts = _load_fonts()
    n = per_class * 10
    images = np.empty((n, IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    pos = 0
    for digit in range(10):
        for _ in range(per_class):
            images[pos] = render_digit(digit, rng, fonts)
            labels[pos] = digit
            pos += 1
    order = rng.permutation(n)
    scaled = images[order].astype(np.float32) / np.float32(256.0)
    return Dataset(scaled, labels[order], provenance, seed)


def write_idx_corpus(dirpath, train_per_class, test_per_class, seed=0):
    """Write a rendered train/test corpus as IDX files in ``dirpath``.

    Existing files are left alone, so repeated calls are cheap. Returns the
    directory path.
    """
    os.makedirs(dirpath, exist_ok=True)
    train_images = os.path.join(dirpath, TRAIN_IMAGES)
    if not os.path.exists(train_images):
        ds = make_digit_dataset(train_per_class, seed=seed, provenance="train")
        save_idx(ds, train_images, os.path.join(dirpath, TRAIN_LABELS))
    test_images = os.path.join(dirpath, TEST_IMAGES)
    if not os.path.exists(test_images):
        ds = make_digit_dataset(test_per_class, seed=seed + 1, provenance="test")
        save_idx(ds, test_images, os.path.join(dirpath, TEST_LABELS))
    return dirpath
