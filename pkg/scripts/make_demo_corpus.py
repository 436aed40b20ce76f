#!/usr/bin/env python3
"""Build a small demo corpus: random grayscale PGM images plus a
privacy-rect fixture file, ready for `privshare upload`."""

import argparse
import random
import sys
from pathlib import Path

from privshare.rop import GrayImage, save_pgm


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="./demo-corpus")
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--height", type=int, default=48)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(args.count):
        image_id = f"img{i:03d}"
        # blocky random texture so toy descriptors differ across images
        pixels = bytearray()
        palette = [rng.randrange(256) for _ in range(8)]
        for y in range(args.height):
            for x in range(args.width):
                base = palette[((x // 8) + (y // 8)) % len(palette)]
                pixels.append(min(255, max(0, base + rng.randrange(-12, 13))))
        save_pgm(GrayImage(args.width, args.height, bytes(pixels)),
                 out / f"{image_id}.pgm")
        margin_x, margin_y = args.width // 8, args.height // 8
        lines.append(f"{image_id} {margin_x} {margin_y} "
                     f"{args.width - margin_x} {args.height - margin_y}")
    (out / "rects.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {args.count} images and rects.txt under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
