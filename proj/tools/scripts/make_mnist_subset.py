#!/usr/bin/env python3
"""Writes the 5000-image MNIST subset bundled with mlxtend as gzip'd IDX files.

usage: make_mnist_subset.py <mlxtend wheel or mnist_5k.csv.gz> <out dir>
"""
import gzip
import io
import struct
import sys
import zipfile

import numpy as np


def load_csv(path):
    if path.endswith(".whl"):
        with zipfile.ZipFile(path) as zf:
            raw = zf.read("mlxtend/data/data/mnist_5k.csv.gz")
        return np.loadtxt(io.TextIOWrapper(gzip.GzipFile(fileobj=io.BytesIO(raw))),
                          delimiter=",", dtype=np.int64)
    return np.loadtxt(gzip.open(path, "rt"), delimiter=",", dtype=np.int64)


def main():
    src, out = sys.argv[1], sys.argv[2]
    table = load_csv(src)
    pixels = table[:, :-1].astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    n = len(labels)
    with gzip.GzipFile(f"{out}/images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        f.write(pixels.tobytes())
    with gzip.GzipFile(f"{out}/labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(labels.tobytes())


if __name__ == "__main__":
    main()
