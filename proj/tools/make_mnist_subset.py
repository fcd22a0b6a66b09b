#!/usr/bin/env python3
"""Write the 5000-image MNIST subset bundled with mlxtend as IDX files.

The subset (500 images per class) ships inside the mlxtend wheel as
mlxtend/data/data/mnist_5k.csv.gz: 784 pixel columns followed by the label.
A stratified, seeded split puts 400 images per class in train and 100 in test.

usage: make_mnist_subset.py SOURCE OUTDIR
SOURCE is either the .csv.gz file or an mlxtend wheel.
"""
import gzip
import random
import struct
import sys
import zipfile
from pathlib import Path


def read_rows(source: Path):
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as z:
            raw = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    else:
        raw = source.read_bytes()
    text = gzip.decompress(raw).decode()
    rows = []
    for line in text.strip().splitlines():
        vals = line.split(",")
        pixels = bytes(int(float(v)) for v in vals[:-1])
        rows.append((pixels, int(vals[-1])))
    return rows


def write_idx(path: Path, rows):
    with open(path.with_name(path.name + "-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(pixels)
    with open(path.with_name(path.name + "-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    source, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    rows = read_rows(source)
    by_class = {}
    for r in rows:
        by_class.setdefault(r[1], []).append(r)
    rng = random.Random(20240515)
    train, test = [], []
    for label in sorted(by_class):
        items = by_class[label]
        rng.shuffle(items)
        train += items[:400]
        test += items[400:]
    rng.shuffle(train)
    rng.shuffle(test)
    write_idx(out / "train", train)
    write_idx(out / "t10k", test)
    print(f"train={len(train)} test={len(test)} -> {out}")


if __name__ == "__main__":
    main()
