"""Convert the digit JSON files of the npm ``mnist`` package to IDX.

Each ``<digit>.json`` holds ``{"data": [...]}`` with 784 pixel values in
[0, 1] per image.  Images of every digit are split deterministically into
train and test parts and written as gzipped IDX files in the standard MNIST
file names, so ``load_mnist`` reads them like the official release.

    python3 scripts/convert_npm_mnist.py path/to/package/src/digits data/mnist-subset
"""

import argparse
import json
from pathlib import Path

import numpy as np

from sparsegrow.data_pipeline import write_idx


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--test-fraction", type=float, default=0.15)
    args = parser.parse_args()

    parts = {"train": ([], []), "test": ([], [])}
    for digit in range(10):
        values = np.asarray(json.loads((args.digits_dir / f"{digit}.json").read_text())["data"])
        images = np.rint(values.reshape(-1, 28, 28) * 255).clip(0, 255).astype(np.uint8)
        n_test = int(round(args.test_fraction * len(images)))
        for split, chunk in (("train", images[:-n_test]), ("test", images[-n_test:])):
            parts[split][0].append(chunk)
            parts[split][1].append(np.full(len(chunk), digit, dtype=np.uint8))

    args.out_dir.mkdir(parents=True, exist_ok=True)
    names = {"train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
             "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")}
    for split, (images, labels) in parts.items():
        # interleave digits in a fixed order so files are not sorted by class
        images, labels = np.concatenate(images), np.concatenate(labels)
        order = np.random.default_rng(0).permutation(len(labels))
        write_idx(args.out_dir / f"{names[split][0]}.gz", images[order])
        write_idx(args.out_dir / f"{names[split][1]}.gz", labels[order])
        print(f"{split}: {len(labels)} images")


if __name__ == "__main__":
    main()
