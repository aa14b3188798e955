"""Convert the 5000-image MNIST sample shipped inside ``mlxtend`` into IDX files.

The sample holds 500 training images per digit; it is enough for desk-scale
runs when the full dataset is not at hand. ``mlxtend`` is located on disk and
never imported.
"""

from __future__ import annotations

import gzip
import importlib.util
import os

import numpy as np

from .data import LabeledImageSet, write_idx

IMAGES_NAME = "mnist5k-images-idx3-ubyte"
LABELS_NAME = "mnist5k-labels-idx1-ubyte"


def find_csv() -> str | None:
    spec = importlib.util.find_spec("mlxtend")
    if spec is None or not spec.submodule_search_locations:
        return None
    path = os.path.join(list(spec.submodule_search_locations)[0], "data", "data", "mnist_5k.csv.gz")
    return path if os.path.exists(path) else None


def prepare(out_dir, csv_path=None) -> tuple[str, str]:
    """Write the IDX pair into ``out_dir`` (skipped if present); returns the two paths."""
    images = os.path.join(out_dir, IMAGES_NAME)
    labels = os.path.join(out_dir, LABELS_NAME)
    if os.path.exists(images) and os.path.exists(labels):
        return images, labels
    csv_path = csv_path or find_csv()
    if csv_path is None:
        raise FileNotFoundError("mlxtend's mnist_5k.csv.gz not found; pip install mlxtend")
    with gzip.open(csv_path, "rt") as fh:
        rows = np.loadtxt(fh, delimiter=",", dtype=np.int64)
    pixels, digits = rows[:, :-1], rows[:, -1]
    os.makedirs(out_dir, exist_ok=True)
    write_idx(images, labels, LabeledImageSet(pixels.reshape(-1, 28, 28) / 255.0, digits, 10))
    return images, labels
