"""Pluggable OCR engine driver and the three-stage confidence cascade.

The engine is an external command that prints word-level TSV. Each frame is
attempted in strict stage order: (1) consensus over the 6 original-image
variants, (2) the same over variants of the background-suppressed image,
(3) per-text-line OCR on segmented regions of the suppressed image. A stage
must both clear its confidence bar and, for whole-frame stages, keep the 6
variant outputs mutually consistent.
"""
from __future__ import annotations

import shlex
import statistics
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ExternalToolError, InputError
from .imgproc import VariantSet, make_variants
from .textmetrics import sim

TSV_HEADER = ("line_num", "left", "top", "width", "height", "conf", "text")

STAGE_ORIGINAL = "original_variants"
STAGE_SUPPRESSED = "suppressed_variants"
STAGE_LINES = "line_segmented"
STAGE_REJECTED = "rejected"
ALL_STAGES = (STAGE_ORIGINAL, STAGE_SUPPRESSED, STAGE_LINES)

LINE_GAP_MIN = 2  # blank-row run that separates segmented text lines
LINE_PAD = 1


@dataclass
class OcrWord:
    text: str
    confidence: float
    line_num: int
    bbox: tuple[int, int, int, int]


@dataclass
class OcrResult:
    """Parsed engine output for one image; stats ignore sentinel confidences."""

    variant_tag: str
    words: list[OcrWord]
    mean_conf: float
    median_conf: float

    @classmethod
    def from_words(cls, variant_tag: str, words: list[OcrWord]) -> "OcrResult":
        confs = [w.confidence for w in words if w.confidence >= 0]
        if confs:
            mean = sum(confs) / len(confs)
            median = float(statistics.median(confs))
        else:
            mean = median = 0.0  # no usable words: treated as zero confidence
        return cls(variant_tag=variant_tag, words=words, mean_conf=mean, median_conf=median)

    def text_lines(self) -> list[str]:
        """Recognized words grouped into lines, in engine line order."""
        by_line: dict[int, list[OcrWord]] = {}
        for w in self.words:
            if w.confidence < 0 or not w.text:
                continue
            by_line.setdefault(w.line_num, []).append(w)
        return [
            " ".join(w.text for w in by_line[k]) for k in sorted(by_line)
        ]

    def text(self) -> str:
        return "\n".join(self.text_lines())


def parse_tsv(body: str, variant_tag: str = "") -> OcrResult:
    """Parse the engine's TSV (header plus one row per word/layout token)."""
    lines = [ln for ln in body.splitlines() if ln.strip("\t ")]
    if not lines:
        raise ExternalToolError("engine produced no TSV header", output=body)
    header = tuple(lines[0].rstrip("\n").split("\t"))
    if header != TSV_HEADER:
        raise ExternalToolError(f"unexpected TSV header {header!r}", output=body)
    words: list[OcrWord] = []
    for row in lines[1:]:
        fields = row.split("\t")
        if len(fields) != len(TSV_HEADER):
            raise ExternalToolError(f"malformed TSV row {row!r}", output=body)
        try:
            line_num = int(fields[0])
            left, top, width, height = (int(v) for v in fields[1:5])
            conf = float(fields[5])
        except ValueError as exc:
            raise ExternalToolError(f"malformed TSV row {row!r}: {exc}", output=body)
        text = fields[6]
        if not text:
            continue  # layout token
        words.append(
            OcrWord(text=text, confidence=conf, line_num=line_num, bbox=(left, top, width, height))
        )
    return OcrResult.from_words(variant_tag, words)


class CommandAdapter:
    """OCR engine behind a command template with an ``{image}`` placeholder."""

    def __init__(self, template: str):
        if "{image}" not in template:
            raise InputError("adapter command template must contain {image}")
        self.template = template

    def run(self, image: np.ndarray, variant_tag: str = "") -> OcrResult:
        with tempfile.TemporaryDirectory(prefix="modaudit_ocr_") as tmp:
            path = Path(tmp) / "input.png"
            mode = "L" if image.ndim == 2 else "RGB"
            Image.fromarray(image, mode=mode).save(path, format="PNG")
            cmd = [part.format(image=str(path)) for part in shlex.split(self.template)]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            if proc.returncode != 0:
                raise ExternalToolError(
                    f"OCR engine exited with {proc.returncode}",
                    output=proc.stdout + proc.stderr,
                )
            return parse_tsv(proc.stdout, variant_tag)


@dataclass
class CascadeThresholds:
    stage_conf: float = 95.0
    consistency_tau: float = 0.8
    line_median: float = 74.0
    line_mean: float = 70.0


@dataclass
class CascadeOutcome:
    frame: str
    stage: str
    lines: list[str]
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "frame": self.frame,
            "stage": self.stage,
            "lines": self.lines,
            "diagnostics": self.diagnostics,
        }


def _run_variants(variant_images, adapter, jobs: int) -> list[OcrResult]:
    def one(item):
        tag, img = item
        return adapter.run(img, variant_tag=tag)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, variant_images))
    return [one(item) for item in variant_images]


def consensus_stage(
    variant_images, adapter, thresholds: CascadeThresholds, jobs: int = 1
) -> tuple[OcrResult, float, bool]:
    """OCR every variant; pick the most confident; gate on confidence plus
    mutual consistency of all variant outputs."""
    results = _run_variants(variant_images, adapter, jobs)
    texts = [r.text() for r in results]
    pair_sims = [
        sim(texts[i], texts[j]) for i in range(len(texts)) for j in range(i + 1, len(texts))
    ]
    consistency = sum(pair_sims) / len(pair_sims) if pair_sims else 1.0
    best = max(results, key=lambda r: r.mean_conf)
    accepted = best.mean_conf > thresholds.stage_conf and consistency >= thresholds.consistency_tau
    return best, consistency, accepted


def segment_lines(suppressed: np.ndarray, gap_min: int = LINE_GAP_MIN) -> list[tuple[int, int]]:
    """(top, bottom) row bands of ink in a black-on-white suppressed image.

    Projection-profile split: bands separate where at least ``gap_min`` blank
    rows intervene.
    """
    gray = suppressed if suppressed.ndim == 2 else suppressed[..., 0]
    ink_rows = np.nonzero((gray < 128).any(axis=1))[0]
    if len(ink_rows) == 0:
        return []
    bands = []
    start = prev = int(ink_rows[0])
    for r in ink_rows[1:]:
        r = int(r)
        if r - prev > gap_min:
            bands.append((start, prev))
            start = r
        prev = r
    bands.append((start, prev))
    h = gray.shape[0]
    return [(max(0, top - LINE_PAD), min(h - 1, bottom + LINE_PAD)) for top, bottom in bands]


def line_segmented_stage(
    suppressed: np.ndarray, adapter, thresholds: CascadeThresholds, jobs: int = 1
) -> tuple[list[str], list[dict]]:
    """Per-line OCR over variants of each segmented region of the suppressed
    image; a line is kept iff its best result clears the median and mean
    confidence bars."""
    bands = segment_lines(suppressed)
    tasks = []
    for band_idx, (top, bottom) in enumerate(bands):
        crop = suppressed[top : bottom + 1]
        for tag, img in make_variants(crop).variants:
            tasks.append((band_idx, tag, img))

    def one(task):
        band_idx, tag, img = task
        return band_idx, adapter.run(img, variant_tag=tag)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(one, tasks))
    else:
        outputs = [one(t) for t in tasks]

    by_band: dict[int, list[OcrResult]] = {}
    for band_idx, result in outputs:
        by_band.setdefault(band_idx, []).append(result)

    lines: list[str] = []
    details: list[dict] = []
    for band_idx in range(len(bands)):
        results = by_band.get(band_idx, [])
        if not results:
            continue
        best = max(results, key=lambda r: r.mean_conf)
        accepted = (
            best.median_conf >= thresholds.line_median and best.mean_conf >= thresholds.line_mean
        )
        text = " ".join(best.text_lines())
        details.append(
            {
                "band": list(bands[band_idx]),
                "variant": best.variant_tag,
                "mean_conf": best.mean_conf,
                "median_conf": best.median_conf,
                "accepted": accepted,
            }
        )
        if accepted and text:
            lines.append(text)
    return lines, details


def cascade(
    frame_ref: str,
    variants: VariantSet,
    adapter,
    thresholds: CascadeThresholds | None = None,
    stages: tuple[str, ...] = ALL_STAGES,
    jobs: int = 1,
) -> CascadeOutcome:
    """Run the confidence cascade for one frame.

    ``stages`` restricts which rungs are attempted (used by ablation runs);
    ordering among the attempted rungs is always original -> suppressed ->
    line-segmented. Output lines come from exactly one stage.
    """
    thresholds = thresholds or CascadeThresholds()
    diagnostics: dict = {}

    if STAGE_ORIGINAL in stages:
        best, consistency, ok = consensus_stage(variants.variants, adapter, thresholds, jobs)
        diagnostics["original"] = {
            "variant": best.variant_tag,
            "mean_conf": best.mean_conf,
            "consistency": consistency,
        }
        if ok:
            return CascadeOutcome(frame_ref, STAGE_ORIGINAL, best.text_lines(), diagnostics)

    needs_suppressed = STAGE_SUPPRESSED in stages or STAGE_LINES in stages
    if needs_suppressed and variants.suppressed_origin is None:
        diagnostics["suppressed"] = {"skipped": "no suppressed image available"}
        return CascadeOutcome(frame_ref, STAGE_REJECTED, [], diagnostics)

    if STAGE_SUPPRESSED in stages:
        sup_variants = make_variants(variants.suppressed_origin)
        best, consistency, ok = consensus_stage(sup_variants.variants, adapter, thresholds, jobs)
        diagnostics["suppressed"] = {
            "variant": best.variant_tag,
            "mean_conf": best.mean_conf,
            "consistency": consistency,
        }
        if ok:
            return CascadeOutcome(frame_ref, STAGE_SUPPRESSED, best.text_lines(), diagnostics)

    if STAGE_LINES in stages:
        lines, details = line_segmented_stage(
            variants.suppressed_origin, adapter, thresholds, jobs
        )
        diagnostics["lines"] = details
        if lines:
            return CascadeOutcome(frame_ref, STAGE_LINES, lines, diagnostics)

    return CascadeOutcome(frame_ref, STAGE_REJECTED, [], diagnostics)
