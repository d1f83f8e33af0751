#!/usr/bin/env python3
"""Write the bundled MNIST subset as gzipped IDX files.

The source is the `mnist_5k.csv.gz` table shipped inside the mlxtend wheel:
the first 500 training images of each digit, raw 0-255 bytes, grouped by
digit in original file order.

    pip download --no-deps mlxtend -d /tmp/wheels
    python3 scripts/extract_mnist_subset.py /tmp/wheels/mlxtend-*.whl data/
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main() -> None:
    wheel, out_dir = sys.argv[1], Path(sys.argv[2])
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read(MEMBER)).decode()
    rows = [list(map(int, line.split(","))) for line in text.splitlines() if line]
    images = bytearray()
    labels = bytearray()
    for row in rows:
        assert len(row) == 785
        images.extend(row[:784])
        labels.append(row[784])
    n = len(rows)
    out_dir.mkdir(parents=True, exist_ok=True)
    img = struct.pack(">IIII", 0x00000803, n, 28, 28) + bytes(images)
    lab = struct.pack(">II", 0x00000801, n) + bytes(labels)
    # mtime=0 keeps the archives byte-reproducible
    for name, payload in [
        ("mnist-train-first500-images-idx3-ubyte.gz", img),
        ("mnist-train-first500-labels-idx1-ubyte.gz", lab),
    ]:
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as gz:
            gz.write(payload)
        (out_dir / name).write_bytes(buf.getvalue())
    print(f"wrote {n} images to {out_dir}")


if __name__ == "__main__":
    main()
