"""Stand-in frame extractor for tests.

Usage: fake_extractor.py <video.json> <outdir>

The "video" is a JSON descriptor: {"frames": N, "size": [h, w], "seed": s}.
Writes frame_000000.png .. frame_{N-1:06d}.png into <outdir>. Exits 3 with a
message on stderr when the descriptor contains {"fail": true}.
"""
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image


def main() -> int:
    video = json.loads(Path(sys.argv[1]).read_text())
    outdir = Path(sys.argv[2])
    outdir.mkdir(parents=True, exist_ok=True)
    if video.get("fail"):
        print("simulated decoder failure", file=sys.stderr)
        return 3
    h, w = video.get("size", [32, 32])
    rng = np.random.default_rng(video.get("seed", 0))
    for i in range(video["frames"]):
        img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        Image.fromarray(img, mode="RGB").save(outdir / f"frame_{i:06d}.png")
    return 0


if __name__ == "__main__":
    sys.exit(main())
