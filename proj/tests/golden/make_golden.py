#!/usr/bin/env python3
"""Writes the TGT1 golden files with a standalone encoder (struct only)."""
import struct
import sys
from pathlib import Path


def encode(name: str, shape, values) -> bytes:
    raw = name.encode("utf-8")
    out = b"TGT1" + struct.pack("<H", len(raw)) + raw + struct.pack("<I", len(shape))
    out += b"".join(struct.pack("<I", e) for e in shape)
    out += b"".join(struct.pack("<d", v) for v in values)
    return out


CASES = {
    "scalar.tgt": ("s", [], [1.5]),
    "matrix.tgt": ("weights", [2, 3], [1.0, -2.5, 3.25, 0.0, -0.0, 1e-300]),
    "cube.tgt": ("patch_embeddings", [2, 3, 4], [0.1 * i - 1.0 for i in range(24)]),
    "extremes.tgt": ("données", [4], [5e-324, 1.7976931348623157e308, -2.2250738585072014e-308, 0.1]),
    "empty.tgt": ("", [0, 5], []),
}


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    for file, (name, shape, values) in CASES.items():
        (out_dir / file).write_bytes(encode(name, shape, values))


if __name__ == "__main__":
    main()
