"""Moderation-event forensics: masked spans, per-user ratios, review strata.

The platform replaces filtered content with runs of '#', which OCR often
misreads as 'H' or '4'. A whitespace token counts as a masked span when it is
long enough, composed mostly of those glyphs, and does not look like one of
the known interjections ("AHHHH", "HAHAHA", "HMM"). Per-user masked-message
ratios put repeat offenders into high/medium/low review strata.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable

from .transcript import ChatLine, SERVER_SPEAKER, UNKNOWN_SPEAKER

MIN_SPAN_LENGTH = 3
PURITY_THRESHOLD = 0.6
MASK_GLYPHS = frozenset("#h4")

INTERJECTION_RES = (
    re.compile(r"^A+H+!*$", re.I),
    re.compile(r"^(HA)+H?$", re.I),
    re.compile(r"^H+M+$", re.I),
)

MIN_MASKED_FOR_REVIEW = 7
HIGH_RATIO = 0.90
LOW_RATIO = 0.50

STRATUM_HIGH = "high"
STRATUM_MEDIUM = "medium"
STRATUM_LOW = "low"
STRATUM_UNASSIGNED = "unassigned"


@dataclass
class MaskedSpan:
    start: int
    length: int
    glyphs: str
    score: float

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "length": self.length,
            "glyphs": self.glyphs,
            "score": self.score,
        }


def _purity(token: str) -> float:
    folded = token.casefold()
    return sum(c in MASK_GLYPHS for c in folded) / len(folded)


def _qualifies(token: str, exclusion_words: frozenset[str]) -> bool:
    if len(token) < MIN_SPAN_LENGTH:
        return False
    if _purity(token) < PURITY_THRESHOLD:
        return False
    if token.casefold() in exclusion_words:
        return False
    return not any(rx.match(token) for rx in INTERJECTION_RES)


def detect_masked_spans(
    text: str,
    merge_adjacent: bool = False,
    exclusion_words: frozenset[str] = frozenset(),
) -> list[MaskedSpan]:
    """Masked spans in one chat line.

    With ``merge_adjacent`` set, qualifying tokens separated by a single
    space fuse into one span; the default keeps one span per token, matching
    how per-word masking shows up in transcripts. ``exclusion_words`` extends
    the built-in interjection shapes with literal lexicon entries.
    """
    tokens = [
        (m.start(), m.group(0))
        for m in re.finditer(r"\S+", text)
        if _qualifies(m.group(0), exclusion_words)
    ]
    spans: list[tuple[int, int]] = []  # (start, end) end exclusive
    for start, token in tokens:
        end = start + len(token)
        if (
            merge_adjacent
            and spans
            and start == spans[-1][1] + 1
            and text[spans[-1][1]] == " "
        ):
            spans[-1] = (spans[-1][0], end)
        else:
            spans.append((start, end))

    out = []
    for start, end in spans:
        glyphs = text[start:end]
        purity = _purity(glyphs.replace(" ", ""))
        length = end - start
        out.append(
            MaskedSpan(
                start=start,
                length=length,
                glyphs=glyphs,
                score=purity * (1.0 + math.log(length)),
            )
        )
    return out


def annotate_lines(
    lines: Iterable[ChatLine],
    merge_adjacent: bool = False,
    exclusion_words: frozenset[str] = frozenset(),
) -> list[ChatLine]:
    """Fill ``masked_spans`` on every line; returns the same list."""
    result = []
    for line in lines:
        spans = detect_masked_spans(
            line.text, merge_adjacent=merge_adjacent, exclusion_words=exclusion_words
        )
        line.masked_spans = [(s.start, s.length) for s in spans]
        result.append(line)
    return result


@dataclass
class UserProfile:
    pseudonym: str
    total_lines: int
    masked_lines: int
    freq_ratio: float
    stratum: str

    def to_dict(self) -> dict:
        return {
            "pseudonym": self.pseudonym,
            "total_lines": self.total_lines,
            "masked_lines": self.masked_lines,
            "freq_ratio": self.freq_ratio,
            "stratum": self.stratum,
        }


def stratify(masked_lines: int, freq_ratio: float) -> str:
    """Review stratum from the masked-message ratio.

    Strictly above 0.90 is high; 0.50 or below is low; in between is medium.
    Users with fewer than 7 masked messages stay unassigned.
    """
    if masked_lines < MIN_MASKED_FOR_REVIEW:
        return STRATUM_UNASSIGNED
    if freq_ratio > HIGH_RATIO:
        return STRATUM_HIGH
    if freq_ratio > LOW_RATIO:
        return STRATUM_MEDIUM
    return STRATUM_LOW


def profile_users(lines: Iterable[ChatLine]) -> list[UserProfile]:
    """Per-pseudonym counts over an annotated corpus.

    Server and unattributed lines belong to no user and are not profiled.
    """
    totals: dict[str, int] = {}
    masked: dict[str, int] = {}
    for line in lines:
        if line.speaker in (SERVER_SPEAKER, UNKNOWN_SPEAKER):
            continue
        totals[line.speaker] = totals.get(line.speaker, 0) + 1
        if line.masked_spans:
            masked[line.speaker] = masked.get(line.speaker, 0) + 1
    profiles = []
    for pseudonym in sorted(totals):
        t = totals[pseudonym]
        m = masked.get(pseudonym, 0)
        ratio = m / t
        profiles.append(
            UserProfile(
                pseudonym=pseudonym,
                total_lines=t,
                masked_lines=m,
                freq_ratio=ratio,
                stratum=stratify(m, ratio),
            )
        )
    return profiles


def rank_frequency(profiles: Iterable[UserProfile]) -> list[tuple[str, int]]:
    """(pseudonym, masked_lines) ordered by count descending, name ascending."""
    return [
        (p.pseudonym, p.masked_lines)
        for p in sorted(profiles, key=lambda p: (-p.masked_lines, p.pseudonym))
    ]
