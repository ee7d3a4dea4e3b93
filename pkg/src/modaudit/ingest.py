"""Recording ingestion: cropped frame sequences with SSIM-based dedup.

A recording session points either at a directory of numbered PNG frames or
at a video file plus an external extractor command that produces such a
directory. Consecutive frames whose structural similarity reaches the dedup
threshold are collapsed onto their first appearance.
"""
from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import cv2
import numpy as np
from PIL import Image

from .errors import ExternalToolError, InputError
from .imgproc import to_gray

KNOWN_GAMES = ("AdoptMe", "BerryAve", "Brookhaven", "RoyaleHigh")
AGE_BANDS = ("9+", "13+")
FRAME_PATTERN = "frame_*.png"
FRAME_NAME = "frame_{:06d}.png"

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0
DEDUP_SSIM_THRESHOLD = 0.9


@dataclass(frozen=True)
class CropRect:
    x: int
    y: int
    w: int
    h: int

    def validate_within(self, height: int, width: int) -> None:
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"crop rect {self} has non-positive size")
        if self.x < 0 or self.y < 0 or self.x + self.w > width or self.y + self.h > height:
            raise InputError(
                f"crop rect {self} lies outside a {width}x{height} frame"
            )

    def apply(self, image: np.ndarray) -> np.ndarray:
        self.validate_within(image.shape[0], image.shape[1])
        return image[self.y : self.y + self.h, self.x : self.x + self.w].copy()


@dataclass
class RecordingSession:
    """One recorded game/age-band chat window."""

    session_id: str
    game: str
    age_band: str
    source: Path
    crop_rect: CropRect
    fps: float | None = None

    def __post_init__(self):
        self.source = Path(self.source)
        if self.age_band not in AGE_BANDS:
            raise InputError(f"age_band must be one of {AGE_BANDS}, got {self.age_band!r}")

    @classmethod
    def from_manifest(cls, doc: dict, base_dir: Path | None = None) -> "RecordingSession":
        rect = doc["crop_rect"]
        source = Path(doc["source"])
        if base_dir is not None and not source.is_absolute():
            source = base_dir / source
        return cls(
            session_id=doc["session_id"],
            game=doc["game"],
            age_band=doc["age_band"],
            source=source,
            crop_rect=CropRect(rect["x"], rect["y"], rect["w"], rect["h"]),
            fps=doc.get("fps"),
        )

    def to_manifest(self) -> dict:
        doc = {
            "session_id": self.session_id,
            "game": self.game,
            "age_band": self.age_band,
            "source": str(self.source),
            "crop_rect": {
                "x": self.crop_rect.x,
                "y": self.crop_rect.y,
                "w": self.crop_rect.w,
                "h": self.crop_rect.h,
            },
        }
        if self.fps is not None:
            doc["fps"] = self.fps
        return doc


@dataclass
class Frame:
    session_id: str
    seq: int
    image: np.ndarray
    wall_offset_ms: int | None = None


def load_image_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_image_rgb(path: Path, image: np.ndarray) -> None:
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def _frames_from_dir(session: RecordingSession, directory: Path) -> Iterator[Frame]:
    paths = sorted(directory.glob(FRAME_PATTERN))
    if not paths:
        raise InputError(f"no {FRAME_PATTERN} files in {directory}")
    for seq, path in enumerate(paths):
        image = session.crop_rect.apply(load_image_rgb(path))
        offset = None
        if session.fps:
            offset = round(seq * 1000.0 / session.fps)
        yield Frame(session_id=session.session_id, seq=seq, image=image, wall_offset_ms=offset)


def extract_frames(
    session: RecordingSession,
    extractor_cmd: str | None = None,
    workdir: Path | None = None,
) -> Iterator[Frame]:
    """Frames in sequence order, cropped to the session's chat-window rect.

    Directory sources are read directly; video sources are handed to
    ``extractor_cmd`` (a template with ``{input}`` and ``{outdir}``) which
    must write ``frame_%06d.png`` files into ``{outdir}``.
    """
    if not session.source.exists():
        raise InputError(f"session source does not exist: {session.source}")
    if session.source.is_dir():
        yield from _frames_from_dir(session, session.source)
        return

    if not extractor_cmd:
        raise InputError(
            f"source {session.source} is a file but no extractor command is configured"
        )
    own_tmp = None
    if workdir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix="modaudit_frames_")
        workdir = Path(own_tmp.name)
    try:
        workdir.mkdir(parents=True, exist_ok=True)
        cmd = [
            part.format(input=str(session.source), outdir=str(workdir))
            for part in shlex.split(extractor_cmd)
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ExternalToolError(
                f"frame extractor exited with {proc.returncode}: {' '.join(cmd)}",
                output=proc.stdout + proc.stderr,
            )
        yield from _frames_from_dir(session, workdir)
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local structural similarity over 11x11 Gaussian windows.

    Inputs are converted to BT.601 luma; K1=0.01, K2=0.03, L=255. Symmetric,
    range [-1, 1], exactly 1.0 for identical images.
    """
    if a.shape[:2] != b.shape[:2]:
        raise InputError(f"image dimensions differ: {a.shape[:2]} vs {b.shape[:2]}")
    ga = to_gray(a).astype(np.float64)
    gb = to_gray(b).astype(np.float64)
    h, w = ga.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise InputError(f"images must be at least {SSIM_WINDOW}px on each side")

    kernel_1d = cv2.getGaussianKernel(SSIM_WINDOW, SSIM_SIGMA)
    kernel = np.outer(kernel_1d, kernel_1d)
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    half = SSIM_WINDOW // 2

    def valid(img: np.ndarray) -> np.ndarray:
        return cv2.filter2D(img, -1, kernel)[half:-half, half:-half]

    mu1 = valid(ga)
    mu2 = valid(gb)
    var1 = valid(ga * ga) - mu1 * mu1
    var2 = valid(gb * gb) - mu2 * mu2
    cov = valid(ga * gb) - mu1 * mu2
    num = (2 * mu1 * mu2 + c1) * (2 * cov + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    return float(np.mean(num / den))


def dedup_frames(
    frames: Iterable[Frame], threshold: float = DEDUP_SSIM_THRESHOLD
) -> Iterator[Frame]:
    """Drop each frame that scores >= threshold against the last kept frame.

    Keeping the first appearance of every visual state makes the pass
    idempotent and preserves chronological first-seen text.
    """
    last: Frame | None = None
    for frame in frames:
        if last is not None and ssim(last.image, frame.image) >= threshold:
            continue
        last = frame
        yield frame
