"""Image variants for consensus OCR plus chat-window background suppression.

Every frame is expanded into 6 deterministic variants ({grayscale, blur,
otsu} x {normal, inverted}); background suppression keeps only pixels that
clear a per-channel RGB threshold and paints them black on white. The
per-game threshold is picked by scoring all candidate combinations against a
manually transcribed ground truth.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import cv2
import numpy as np

from .errors import InputError
from .textmetrics import DEFAULT_TAU, EvalReport, report

GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R BT.601 luma
BLUR_KSIZE = 5
BLUR_SIGMA = 1.0
CANDIDATE_VALUES = (50, 100, 150, 200)

VARIANT_TAGS = (
    "grayscale",
    "grayscale_inv",
    "blur",
    "blur_inv",
    "otsu",
    "otsu_inv",
)


def to_gray(image: np.ndarray) -> np.ndarray:
    """8-bit luma plane; RGB inputs use BT.601 weights, gray passes through."""
    if image.ndim == 2:
        return image.astype(np.uint8, copy=False)
    if image.ndim == 3 and image.shape[2] == 3:
        r, g, b = GRAY_WEIGHTS
        luma = image[..., 0] * r + image[..., 1] * g + image[..., 2] * b
        return np.rint(luma).clip(0, 255).astype(np.uint8)
    raise InputError(f"expected HxW or HxWx3 image, got shape {image.shape}")


def invert(image: np.ndarray) -> np.ndarray:
    return (255 - image.astype(np.int16)).astype(np.uint8)


def otsu_threshold(gray: np.ndarray) -> int:
    """Threshold maximizing between-class variance over the 256-bin histogram.

    Class 0 is ``pixel <= t``. Comparisons run in exact integer arithmetic so
    ties are real ties, broken toward the smallest threshold. A constant
    image returns its constant value.
    """
    if gray.ndim != 2:
        raise InputError("otsu_threshold expects a grayscale image")
    hist = np.bincount(gray.ravel().astype(np.int64), minlength=256)
    nonzero = np.nonzero(hist)[0]
    if len(nonzero) == 0:
        raise InputError("empty image")
    if len(nonzero) == 1:
        return int(nonzero[0])

    total = int(hist.sum())
    total_intensity = int((hist * np.arange(256, dtype=np.int64)).sum())

    # sigma_b^2(t) is proportional to (s0*w1 - (S-s0)*w0)^2 / (w0*w1), all
    # integers, so the argmax can be taken with cross-multiplied comparisons.
    best_t = 0
    best_num = -1  # numerator squared
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += int(hist[t])
        s0 += t * int(hist[t])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            num, den = 0, 1
        else:
            diff = s0 * w1 - (total_intensity - s0) * w0
            num, den = diff * diff, w0 * w1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize(gray: np.ndarray, threshold: int) -> np.ndarray:
    """255 where pixel > threshold, else 0."""
    return np.where(gray > threshold, 255, 0).astype(np.uint8)


@dataclass
class VariantSet:
    """The 6 single-image transforms the OCR consensus runs over."""

    origin: str | None
    variants: list[tuple[str, np.ndarray]]
    suppressed_origin: np.ndarray | None = None

    def get(self, tag: str) -> np.ndarray:
        for t, img in self.variants:
            if t == tag:
                return img
        raise KeyError(tag)


def make_variants(image: np.ndarray, origin: str | None = None) -> VariantSet:
    """Grayscale, Gaussian blur and Otsu binarization, each in both polarities.

    Blur and Otsu are applied to the grayscale plane; inversion is 255-pixel.
    """
    gray = to_gray(image)
    blur = cv2.GaussianBlur(gray, (BLUR_KSIZE, BLUR_KSIZE), BLUR_SIGMA)
    otsu = binarize(gray, otsu_threshold(gray))
    variants = [
        ("grayscale", gray),
        ("grayscale_inv", invert(gray)),
        ("blur", blur),
        ("blur_inv", invert(blur)),
        ("otsu", otsu),
        ("otsu_inv", invert(otsu)),
    ]
    return VariantSet(origin=origin, variants=variants)


@dataclass(frozen=True)
class RgbThreshold:
    """Per-channel lower bounds deciding which pixels count as chat text."""

    t_r: int
    t_g: int
    t_b: int

    def __post_init__(self):
        for v in (self.t_r, self.t_g, self.t_b):
            if not 0 <= v <= 255:
                raise InputError(f"channel threshold {v} outside [0, 255]")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.t_r, self.t_g, self.t_b)


def candidate_thresholds(values: Sequence[int] = CANDIDATE_VALUES) -> list[RgbThreshold]:
    """The full candidate grid (64 combinations for the default values)."""
    return [RgbThreshold(*combo) for combo in itertools.product(values, repeat=3)]


def suppress_background(
    image: np.ndarray, thr: RgbThreshold, invert_predicate: bool = False
) -> np.ndarray:
    """Black-on-white image keeping only pixels at or above all three bounds.

    ``invert_predicate`` flips the keep rule for chat skins with dark text;
    it is a config escape hatch and never part of the threshold search.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputError("suppress_background expects an RGB image")
    mask = (
        (image[..., 0] >= thr.t_r)
        & (image[..., 1] >= thr.t_g)
        & (image[..., 2] >= thr.t_b)
    )
    if invert_predicate:
        mask = ~mask
    out = np.full(image.shape, 255, dtype=np.uint8)
    out[mask] = 0
    return out


@dataclass
class ThresholdSearchResult:
    best: RgbThreshold
    scores: list[tuple[RgbThreshold, float, float]] = field(default_factory=list)

    def score_table(self) -> list[dict]:
        return [
            {"threshold": t.as_tuple(), "recall": r, "ams": a} for t, r, a in self.scores
        ]


def search_thresholds(
    ground_truth: list[str],
    frames: Sequence[np.ndarray],
    ocr: Callable[[np.ndarray], list[str]],
    candidates: Sequence[RgbThreshold] | None = None,
    tau: float = DEFAULT_TAU,
    jobs: int = 1,
) -> ThresholdSearchResult:
    """Score every candidate and keep the one with the best matched-line recall.

    ``ocr`` maps one image to its recognized text lines. Ties on recall fall
    back to higher average matched similarity, then to the lexicographically
    smallest (t_r, t_g, t_b).
    """
    if not ground_truth:
        raise InputError("threshold search needs a non-empty ground truth")
    cands = list(candidates) if candidates is not None else candidate_thresholds()

    def evaluate(thr: RgbThreshold) -> tuple[RgbThreshold, EvalReport]:
        lines: list[str] = []
        for frame in frames:
            lines.extend(ocr(suppress_background(frame, thr)))
        return thr, report(ground_truth, lines, tau=tau)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate, cands))
    else:
        results = [evaluate(thr) for thr in cands]

    scored = [(thr, rep.recall, rep.ams) for thr, rep in results]
    best = max(scored, key=lambda s: (s[1], s[2], tuple(-v for v in s[0].as_tuple())))
    return ThresholdSearchResult(best=best[0], scores=scored)
