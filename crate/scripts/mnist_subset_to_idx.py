#!/usr/bin/env python3
"""Write a 5,000-image MNIST subset as IDX files.

Reads mnist_5k.csv.gz (784 pixels then the label per row) from a local
mlxtend wheel or a plain CSV path, shuffles with a fixed seed and writes
4,000 training and 1,000 test images in the standard IDX layout.
"""

import argparse
import gzip
import io
import random
import struct
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(source: Path):
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as z:
            raw = gzip.decompress(z.read(MEMBER))
    elif source.suffix == ".gz":
        raw = gzip.decompress(source.read_bytes())
    else:
        raw = source.read_bytes()
    rows = []
    for line in io.StringIO(raw.decode("ascii")):
        line = line.strip()
        if not line:
            continue
        values = [int(float(v)) for v in line.split(",")]
        if len(values) != 785:
            raise ValueError(f"expected 785 values per row, got {len(values)}")
        rows.append((values[-1], bytes(values[:-1])))
    return rows


def write_idx(out: Path, stem: str, rows):
    images = struct.pack(">IIII", 0x803, len(rows), 28, 28) + b"".join(p for _, p in rows)
    labels = struct.pack(">II", 0x801, len(rows)) + bytes(label for label, _ in rows)
    (out / f"{stem}-images-idx3-ubyte").write_bytes(images)
    (out / f"{stem}-labels-idx1-ubyte").write_bytes(labels)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("source", type=Path, help="mlxtend wheel, .csv.gz or .csv")
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = read_rows(args.source)
    random.Random(args.seed).shuffle(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out, "t10k", rows[: args.test])
    write_idx(args.out, "train", rows[args.test :])
    print(f"{len(rows) - args.test} train, {args.test} test images in {args.out}")


if __name__ == "__main__":
    main()
