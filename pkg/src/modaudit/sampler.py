"""Stratified review sampling and saturation tracking.

One tracker serves both review workflows: conversation review uses a
novelty window of 5, per-user evasion review uses 3. A window entry is
appended only for annotations with interpretable context; saturation is
declared once the last ``window`` entries are all non-novel. Everything is
replayable from the append-only logs, so live state is never authoritative.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DuplicateAnnotation, InputError, PoolsExhausted

WINDOW_CONVERSATIONS = 5
WINDOW_USERS = 3

VERDICT_TRUE_POSITIVE = "tp"
VERDICT_FALSE_POSITIVE = "fp"


@dataclass
class Stratum:
    """One sampling pool, keyed by (game, age band) or (game, freq level)."""

    key: str
    pool: list[str]
    drawn: list[str] = field(default_factory=list)

    def remaining(self) -> list[str]:
        taken = set(self.drawn)
        return [c for c in self.pool if c not in taken]

    def draw(self, rng: random.Random) -> str | None:
        left = self.remaining()
        if not left:
            return None
        pick = rng.choice(left)
        self.drawn.append(pick)
        return pick

    def mark_drawn(self, candidate: str) -> None:
        if candidate not in self.pool:
            raise InputError(f"{candidate!r} is not in stratum {self.key}")
        if candidate in self.drawn:
            raise InputError(f"{candidate!r} already drawn from {self.key}")
        self.drawn.append(candidate)


def next_sample(strata: Sequence[Stratum], rng: random.Random) -> dict[str, str]:
    """One uniform without-replacement draw per non-exhausted stratum."""
    draws: dict[str, str] = {}
    for stratum in strata:
        pick = stratum.draw(rng)
        if pick is not None:
            draws[stratum.key] = pick
    if not draws:
        raise PoolsExhausted("every stratum pool is exhausted")
    return draws


@dataclass
class AnnotationRecord:
    annotator: str
    target: str
    codes: list[str]
    interpretable: bool
    verdict: str | None = None  # tp/fp for conversation review
    novel: bool | None = None  # filled at append time
    timestamp: int | None = None

    def to_dict(self) -> dict:
        return {
            "annotator": self.annotator,
            "target": self.target,
            "codes": sorted(self.codes),
            "interpretable": self.interpretable,
            "verdict": self.verdict,
            "novel": self.novel,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AnnotationRecord":
        return cls(
            annotator=doc["annotator"],
            target=doc["target"],
            codes=list(doc["codes"]),
            interpretable=doc["interpretable"],
            verdict=doc.get("verdict"),
            novel=doc.get("novel"),
            timestamp=doc.get("timestamp"),
        )


@dataclass
class SaturationState:
    window: int
    recent_novelty: list[bool]
    theme_set: set[str]
    saturated: bool

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "recent_novelty": self.recent_novelty,
            "themes": sorted(self.theme_set),
            "saturated": self.saturated,
        }


class SaturationTracker:
    """Append-only saturation bookkeeping over an annotation stream."""

    def __init__(self, window: int):
        if window < 1:
            raise InputError("window must be positive")
        self.window = window
        self.theme_set: set[str] = set()
        self.recent_novelty: list[bool] = []
        self.log: list[AnnotationRecord] = []
        self._seen: set[tuple[str, str]] = set()

    def record(self, annotation: AnnotationRecord) -> SaturationState:
        """Absorb one annotation; duplicates by (annotator, target) are
        rejected. Non-interpretable records contribute their codes but never
        advance the novelty window."""
        key = (annotation.annotator, annotation.target)
        if key in self._seen:
            raise DuplicateAnnotation(
                f"annotator {annotation.annotator!r} already coded {annotation.target!r}"
            )
        self._seen.add(key)
        novel = any(code not in self.theme_set for code in annotation.codes)
        annotation.novel = novel
        if annotation.timestamp is None:
            annotation.timestamp = len(self.log)
        self.theme_set.update(annotation.codes)
        if annotation.interpretable:
            self.recent_novelty.append(novel)
        self.log.append(annotation)
        return self.state()

    @property
    def saturated(self) -> bool:
        if len(self.recent_novelty) < self.window:
            return False
        return not any(self.recent_novelty[-self.window :])

    def state(self) -> SaturationState:
        return SaturationState(
            window=self.window,
            recent_novelty=list(self.recent_novelty),
            theme_set=set(self.theme_set),
            saturated=self.saturated,
        )

    @classmethod
    def replay(cls, window: int, records: Iterable[AnnotationRecord]) -> "SaturationTracker":
        tracker = cls(window)
        for rec in records:
            tracker.record(
                AnnotationRecord(
                    annotator=rec.annotator,
                    target=rec.target,
                    codes=list(rec.codes),
                    interpretable=rec.interpretable,
                    verdict=rec.verdict,
                    timestamp=rec.timestamp,
                )
            )
        return tracker


class ReviewSession:
    """Drives one workflow: iterate draws across strata, collect annotations.

    ``next_target`` is idempotent until the pending target is annotated, so a
    reloading client never burns a draw. Draw and annotation history replay
    deterministically from their logs.
    """

    def __init__(self, strata: Sequence[Stratum], window: int, seed: int):
        self.strata = list(strata)
        self.tracker = SaturationTracker(window)
        self.rng = random.Random(seed)
        self.queue: list[str] = []
        self.current: str | None = None
        self.draw_log: list[str] = []
        self._annotated: set[str] = set()

    def next_target(self) -> str:
        if self.current is not None:
            return self.current
        if not self.queue:
            draws = next_sample(self.strata, self.rng)  # raises PoolsExhausted
            ordered = [draws[s.key] for s in self.strata if s.key in draws]
            self.queue.extend(ordered)
            self.draw_log.extend(ordered)
        self.current = self.queue.pop(0)
        return self.current

    def submit(self, annotation: AnnotationRecord) -> SaturationState:
        drawn = set(self.draw_log)
        if annotation.target not in drawn:
            raise InputError(f"target {annotation.target!r} was never drawn")
        state = self.tracker.record(annotation)
        self._annotated.add(annotation.target)
        if self.current == annotation.target:
            self.current = None
        return state

    def pending_targets(self) -> list[str]:
        return [t for t in self.draw_log if t not in self._annotated]

    def restore(self, draw_log: list[str], records: list[AnnotationRecord]) -> None:
        """Rebuild state from persisted logs (draws first, then annotations).

        Draws are re-derived from the seed and checked against the log, which
        restores the generator stream exactly; a mismatch means the pools or
        seed changed since the log was written.
        """
        if any(s.drawn for s in self.strata):
            raise InputError("restore requires fresh strata")
        while len(self.draw_log) < len(draw_log):
            draws = next_sample(self.strata, self.rng)
            self.draw_log.extend(draws[s.key] for s in self.strata if s.key in draws)
        if self.draw_log[: len(draw_log)] != list(draw_log):
            raise InputError("draw log does not replay; seed or pools changed")
        for rec in records:
            self.tracker.record(rec)
            self._annotated.add(rec.target)
        pending = self.pending_targets()
        self.queue = pending[1:]
        self.current = pending[0] if pending else None
