"""Project configuration: every pipeline constant, named and defaulted.

The config lives as JSON in the project root. Defaults are the operating
points the pipeline is calibrated for: SSIM dedup at 0.9, text dedup at
0.85, the 95/74/70 OCR confidence bars, matching threshold tau = 0.8, and a
0.9 fuzzy-merge bar for usernames.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import InputError


@dataclass
class ProjectConfig:
    # frame dedup
    ssim_dedup_threshold: float = 0.9
    # OCR cascade
    cascade_stage_conf: float = 95.0
    cascade_consistency_tau: float = 0.8
    cascade_line_median: float = 74.0
    cascade_line_mean: float = 70.0
    # transcript
    text_dedup_threshold: float = 0.85
    text_dedup_window: int = 8
    fuzzy_merge_threshold: float = 0.9
    anonymization_salt: str = "change-me"
    handle_keywords: list[str] = field(
        default_factory=lambda: ["yt", "tt", "tiktok", "insta", "snap", "discord", "disc"]
    )
    # ground-truth comparison
    tau: float = 0.8
    # background suppression: per-game [r, g, b] plus a fallback
    rgb_thresholds: dict[str, list[int]] = field(default_factory=dict)
    default_rgb_threshold: list[int] = field(default_factory=lambda: [200, 200, 200])
    rgb_candidate_values: list[int] = field(default_factory=lambda: [50, 100, 150, 200])
    suppression_invert_predicate: bool = False
    # masked-span detection
    merge_adjacent_masked: bool = False
    mask_exclusion_words: list[str] = field(default_factory=list)
    # external tools
    ocr_adapter: str = ""
    extractor_cmd: str = ""
    # classifier endpoint
    llm_url: str = "http://127.0.0.1:11434/v1/chat/completions"
    llm_model: str = "gpt-oss-120b"
    llm_few_shot: bool = True
    llm_timeout: float = 120.0
    # review sampling
    sampling_seed: int = 1

    def validate(self) -> None:
        checks = [
            ("ssim_dedup_threshold", self.ssim_dedup_threshold, -1.0, 1.0),
            ("cascade_stage_conf", self.cascade_stage_conf, 0.0, 100.0),
            ("cascade_consistency_tau", self.cascade_consistency_tau, 0.0, 1.0),
            ("cascade_line_median", self.cascade_line_median, 0.0, 100.0),
            ("cascade_line_mean", self.cascade_line_mean, 0.0, 100.0),
            ("text_dedup_threshold", self.text_dedup_threshold, 0.0, 1.0),
            ("fuzzy_merge_threshold", self.fuzzy_merge_threshold, 0.0, 1.0),
            ("tau", self.tau, 0.0, 1.0),
        ]
        for name, value, lo, hi in checks:
            if not lo <= value <= hi:
                raise InputError(f"{name}={value} outside [{lo}, {hi}]")
        if self.text_dedup_window < 1:
            raise InputError("text_dedup_window must be at least 1")
        for game, rgb in {**self.rgb_thresholds, "default": self.default_rgb_threshold}.items():
            if len(rgb) != 3 or any(not 0 <= v <= 255 for v in rgb):
                raise InputError(f"rgb threshold for {game!r} must be three values in [0, 255]")

    def rgb_for(self, game: str) -> tuple[int, int, int]:
        rgb = self.rgb_thresholds.get(game, self.default_rgb_threshold)
        return (rgb[0], rgb[1], rgb[2])

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: Path) -> "ProjectConfig":
        doc = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**doc)
        config.validate()
        return config

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_json())
