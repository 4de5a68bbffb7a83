#!/usr/bin/env python3
"""Builds Fashion-MNIST IDX files from the npm package fashion-mnist@1.1.0.

The package stores 7000 images per class (src/clothes/<c>.json) without the
upstream train/test order, so the split here is derived: the first 6000
images of each class go to train, the remaining 1000 to test, and both sets
are interleaved class by class. The result is not byte-identical to the
upstream files and cannot pass the pinned checksums; load it with
--idx-dir.
"""
import argparse
import gzip
import hashlib
import json
import pathlib
import struct

import numpy as np


def write_idx(path, array, magic):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in array.shape)
    raw = header + array.astype(np.uint8).tobytes()
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(raw)
    return hashlib.sha256(raw).hexdigest()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("package", type=pathlib.Path, help="unpacked npm package directory")
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--train-per-class", type=int, default=6000)
    args = ap.parse_args()

    per_class = []
    for c in range(10):
        rows = json.loads((args.package / "src" / "clothes" / f"{c}.json").read_text())["data"]
        rows = [r for r in rows if len(r) == 784]
        per_class.append(np.asarray(rows, dtype=np.uint8).reshape(-1, 28, 28))

    def interleave(parts):
        n = min(len(p) for p in parts)
        images = np.stack([p[:n] for p in parts], axis=1).reshape(-1, 28, 28)
        labels = np.tile(np.arange(10, dtype=np.uint8), n)
        return images, labels

    k = args.train_per_class
    train = interleave([p[:k] for p in per_class])
    test = interleave([p[k:] for p in per_class])

    args.out.mkdir(parents=True, exist_ok=True)
    files = {
        "train-images-idx3-ubyte.gz": (train[0], 0x803),
        "train-labels-idx1-ubyte.gz": (train[1], 0x801),
        "t10k-images-idx3-ubyte.gz": (test[0], 0x803),
        "t10k-labels-idx1-ubyte.gz": (test[1], 0x801),
    }
    for name, (arr, magic) in files.items():
        print(name, arr.shape, write_idx(args.out / name, arr, magic))


if __name__ == "__main__":
    main()
