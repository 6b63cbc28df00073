#!/usr/bin/env python3
"""Regenerates the bundled 8x8 digit IDX files from scikit-learn's digits set.

Pixels (0..16) are rescaled to 0..255 bytes. Samples are shuffled with a fixed
seed and split into 1297 training and 500 test images.
"""
import pathlib
import struct
import sys

import numpy as np
from sklearn.datasets import load_digits


def write_idx_images(path, images):
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main(out_dir):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    images = np.rint(digits.images * 255.0 / 16.0).clip(0, 255)
    labels = digits.target
    order = np.random.RandomState(20200704).permutation(len(labels))
    images, labels = images[order], labels[order]
    n_train = 1297
    write_idx_images(out / "digits-train-images.idx", images[:n_train])
    write_idx_labels(out / "digits-train-labels.idx", labels[:n_train])
    write_idx_images(out / "digits-test-images.idx", images[n_train:])
    write_idx_labels(out / "digits-test-labels.idx", labels[n_train:])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data")
