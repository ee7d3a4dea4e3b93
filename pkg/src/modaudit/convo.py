"""Chunk the corpus into conversations and tag them with unsafe categories.

Conversations are greedy 50-line blocks within one session; a short tail
(fewer than 10 lines) folds into the previous block instead of standing
alone. Categories come from keyword containment over the classifier's
explanation text, multi-label by design.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import InputError
from .transcript import ChatLine

BLOCK_SIZE = 50
MIN_TAIL = 10

LABEL_UNLABELED = "unlabeled"
LABELS = (
    "absolutely_unsafe",
    "possibly_unsafe",
    "possibly_safe",
    "absolutely_safe",
    LABEL_UNLABELED,
)


@dataclass
class CategoryVocabulary:
    """Category name -> lowercase keyword list, user-editable as JSON."""

    entries: dict[str, list[str]]

    def __post_init__(self):
        for name, keywords in self.entries.items():
            if not keywords:
                raise InputError(f"category {name!r} has an empty keyword list")
            self.entries[name] = [k.lower() for k in keywords]

    @classmethod
    def default(cls) -> "CategoryVocabulary":
        text = resources.files("modaudit.assets").joinpath("category_vocabulary.json").read_text()
        return cls(json.loads(text))

    @classmethod
    def from_file(cls, path: Path) -> "CategoryVocabulary":
        return cls(json.loads(Path(path).read_text()))


@dataclass
class Conversation:
    conv_id: str
    session_id: str
    game: str
    age_band: str
    lines: list[ChatLine]
    label: str = LABEL_UNLABELED
    explanation: str = ""
    categories: list[str] = field(default_factory=list)

    def rendered_text(self) -> str:
        return "\n".join(f"{l.speaker}: {l.text}" for l in self.lines)

    def to_dict(self) -> dict:
        return {
            "conv_id": self.conv_id,
            "session_id": self.session_id,
            "game": self.game,
            "age_band": self.age_band,
            "label": self.label,
            "explanation": self.explanation,
            "categories": self.categories,
            "lines": [
                {
                    "session": l.session_id,
                    "seq": l.seq,
                    "speaker": l.speaker,
                    "text": l.text,
                    "masked_spans": [list(s) for s in l.masked_spans],
                }
                for l in self.lines
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Conversation":
        lines = [
            ChatLine(
                session_id=rec["session"],
                seq=rec["seq"],
                speaker=rec["speaker"],
                text=rec["text"],
                masked_spans=[tuple(s) for s in rec.get("masked_spans", [])],
            )
            for rec in doc["lines"]
        ]
        return cls(
            conv_id=doc["conv_id"],
            session_id=doc["session_id"],
            game=doc["game"],
            age_band=doc["age_band"],
            lines=lines,
            label=doc.get("label", LABEL_UNLABELED),
            explanation=doc.get("explanation", ""),
            categories=list(doc.get("categories", [])),
        )


def chunk(
    lines: Iterable[ChatLine],
    session_meta: dict[str, tuple[str, str]],
    block_size: int = BLOCK_SIZE,
    min_tail: int = MIN_TAIL,
) -> list[Conversation]:
    """Split each session's ordered lines into conversations.

    Blocks are ``block_size`` lines; a final block shorter than ``min_tail``
    is appended to the previous one (which may then exceed ``block_size`` by
    up to ``min_tail - 1``). Sessions never mix.
    """
    by_session: dict[str, list[ChatLine]] = {}
    for line in lines:
        by_session.setdefault(line.session_id, []).append(line)

    conversations = []
    for session_id, session_lines in by_session.items():
        blocks = [
            session_lines[i : i + block_size]
            for i in range(0, len(session_lines), block_size)
        ]
        if len(blocks) > 1 and len(blocks[-1]) < min_tail:
            tail = blocks.pop()
            blocks[-1] = blocks[-1] + tail
        game, age_band = session_meta.get(session_id, ("Other", "9+"))
        for i, block in enumerate(blocks):
            conversations.append(
                Conversation(
                    conv_id=f"{session_id}-c{i:04d}",
                    session_id=session_id,
                    game=game,
                    age_band=age_band,
                    lines=block,
                )
            )
    return conversations


def categorize(explanation: str, vocabulary: CategoryVocabulary) -> list[str]:
    """Categories whose keywords appear in the explanation, sorted by name."""
    lowered = explanation.lower()
    return sorted(
        name
        for name, keywords in vocabulary.entries.items()
        if any(k in lowered for k in keywords)
    )
