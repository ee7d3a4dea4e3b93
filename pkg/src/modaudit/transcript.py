"""Parse accepted OCR lines into speaker-attributed chat lines and anonymize.

Speakers are recognized from the common chat formats (``name: msg``,
``name | msg``, ``[name] msg``) after stripping role tags. Usernames are
normalized, fuzzy-merged against the registry to absorb OCR distortions, and
replaced with dense ``user_00001``-style pseudonyms assigned globally across
sessions. Message text is PII-redacted with typed placeholders.
"""
from __future__ import annotations

import hashlib
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator

DEFAULT_ROLE_TAGS = frozenset({"vip", "team", "admin", "mod", "youtube", "premium"})
SERVER_SPEAKER = "server"
UNKNOWN_SPEAKER = "unknown"
PSEUDONYM_RE = re.compile(r"^user_\d{5}$")

FUZZY_MERGE_THRESHOLD = 0.9
DEDUP_THRESHOLD = 0.85
DEDUP_WINDOW = 8

DEFAULT_HANDLE_KEYWORDS = ("yt", "tt", "tiktok", "insta", "snap", "discord", "disc")

_ROLE_TAG_RE = re.compile(r"^\s*\[([^\[\]]{1,16})\]\s*")
_NAME_SEP_RE = re.compile(r"^\s*([A-Za-z0-9_@.\- ]{1,24}?)\s*[:|]\s*(.+)$")
_BRACKET_NAME_RE = re.compile(r"^\s*\[([A-Za-z0-9_@.\- ]{1,24})\]\s+(.+)$")


def parse_line(
    raw: str, role_tags: frozenset[str] = DEFAULT_ROLE_TAGS
) -> tuple[str | None, str]:
    """Split one transcript line into (speaker candidate, message text).

    Total function: anything unrecognized comes back as (None, raw). Role
    tags like [VIP] are dropped first so they are never read as usernames.
    """
    text = raw
    while True:
        m = _ROLE_TAG_RE.match(text)
        if m and re.sub(r"[^a-z0-9]", "", m.group(1).lower()) in role_tags:
            text = text[m.end() :]
            continue
        break

    m = _NAME_SEP_RE.match(text)
    if m:
        return m.group(1).strip(), m.group(2).strip()
    m = _BRACKET_NAME_RE.match(text)
    if m:
        return m.group(1).strip(), m.group(2).strip()
    return None, text.strip()


def normalize_name(name: str) -> str:
    """Canonical form of a username candidate.

    Lowercase, fold accents, drop punctuation except underscore, collapse
    then remove spaces, keep only [a-z0-9_]. Empty results normalize to the
    "unknown" sentinel.
    """
    lowered = unicodedata.normalize("NFKD", name.lower())
    stripped = "".join(c for c in lowered if not unicodedata.combining(c))
    kept = re.sub(r"[^a-z0-9_ ]", "", stripped)
    collapsed = re.sub(r"\s+", " ", kept).strip()
    result = collapsed.replace(" ", "")
    return result if result else UNKNOWN_SPEAKER


def _sim_upper_bound(a: str, b: str) -> float:
    return 2.0 * min(len(a), len(b)) / (len(a) + len(b)) if (a or b) else 1.0


@dataclass
class PseudonymRegistry:
    """Global normalized-name -> pseudonym mapping (single-writer)."""

    entries: dict[str, str] = field(default_factory=dict)
    next_index: int = 1

    def resolve(self, name: str, merge_threshold: float = FUZZY_MERGE_THRESHOLD) -> str:
        """Pseudonym for a normalized name, reusing the best fuzzy match when
        one clears the merge threshold, minting the next user_XXXXX otherwise."""
        from .textmetrics import sim

        hit = self.entries.get(name)
        if hit is not None:
            return hit
        best_name, best_sim = None, merge_threshold
        for known in self.entries:
            if _sim_upper_bound(name, known) <= best_sim:
                continue
            s = sim(name, known)
            if s > best_sim:
                best_name, best_sim = known, s
        if best_name is not None:
            pseudonym = self.entries[best_name]
        else:
            pseudonym = f"user_{self.next_index:05d}"
            self.next_index += 1
        self.entries[name] = pseudonym
        return pseudonym

    def mapping_records(self) -> Iterator[dict]:
        for name, pseudonym in self.entries.items():
            yield {"name": name, "pseudonym": pseudonym}

    @classmethod
    def from_mapping_records(cls, records: Iterable[dict]) -> "PseudonymRegistry":
        reg = cls()
        top = 0
        for rec in records:
            reg.entries[rec["name"]] = rec["pseudonym"]
            m = re.match(r"user_(\d{5})$", rec["pseudonym"])
            if m:
                top = max(top, int(m.group(1)))
        reg.next_index = top + 1
        return reg


@dataclass
class ChatLine:
    session_id: str
    seq: int
    speaker: str
    text: str
    raw_speaker_hash: str = ""  # salted digest, never serialized to the corpus
    masked_spans: list[tuple[int, int]] = field(default_factory=list)

    def to_corpus_record(self) -> dict:
        return {
            "session": self.session_id,
            "seq": self.seq,
            "speaker": self.speaker,
            "text": self.text,
        }


def speaker_hash(raw_name: str, salt: str) -> str:
    return hashlib.sha256((salt + raw_name).encode("utf-8")).hexdigest()[:16]


def dedup_lines(
    lines: Iterable[ChatLine],
    threshold: float = DEDUP_THRESHOLD,
    window: int = DEDUP_WINDOW,
) -> Iterator[ChatLine]:
    """Drop a line when its text is more than ``threshold`` similar to any of
    the previous ``window`` retained lines. Order-preserving."""
    from .textmetrics import sim

    recent: list[str] = []
    for line in lines:
        if any(sim(line.text, prev) > threshold for prev in recent):
            continue
        recent.append(line.text)
        if len(recent) > window:
            recent.pop(0)
        yield line


class Redactor:
    """Rule-based PII redaction with stable per-session placeholder numbers.

    The same raw value always maps to the same placeholder within one
    session; distinct values count up from 001.
    """

    EMAIL_RE = re.compile(r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b")
    URL_RE = re.compile(r"\b(?:https?://\S+|www\.\S+|[a-z0-9-]{2,}\.(?:com|net|org|gg|io|tv)\S*)", re.I)
    DIGITS_RE = re.compile(r"(?<![\d\w])(?:\d[ \-.]?){6,}\d(?![\d\w])")

    def __init__(self, handle_keywords: Iterable[str] = DEFAULT_HANDLE_KEYWORDS):
        keywords = sorted(set(handle_keywords), key=len, reverse=True)
        self.handle_re = (
            re.compile(
                r"\b(" + "|".join(re.escape(k) for k in keywords) + r")\b"
                r"(?:\s+(?:is|=|:))?\s+(@?[A-Za-z0-9_.\-]{3,})",
                re.I,
            )
            if keywords
            else None
        )
        self._numbers: dict[str, dict[str, int]] = {}

    def _placeholder(self, kind: str, value: str) -> str:
        seen = self._numbers.setdefault(kind, {})
        if value not in seen:
            seen[value] = len(seen) + 1
        return f"[{kind}_{seen[value]:03d}]"

    def redact(self, text: str) -> str:
        text = self.EMAIL_RE.sub(lambda m: self._placeholder("EMAIL", m.group(0)), text)
        text = self.URL_RE.sub(lambda m: self._placeholder("URL", m.group(0)), text)
        if self.handle_re is not None:
            def handle_sub(m: re.Match) -> str:
                return m.group(0).replace(
                    m.group(2), self._placeholder("OFFPLATFORM_HANDLE", m.group(2))
                )

            text = self.handle_re.sub(handle_sub, text)

        def digit_sub(m: re.Match) -> str:
            digits = re.sub(r"\D", "", m.group(0))
            if len(digits) < 7:
                return m.group(0)
            return self._placeholder("PHONE", digits)

        return self.DIGITS_RE.sub(digit_sub, text)


def assemble_lines(
    session_id: str,
    raw_lines: Iterable[str],
    registry: PseudonymRegistry,
    redactor: Redactor,
    salt: str = "",
    dedup_threshold: float = DEDUP_THRESHOLD,
    dedup_window: int = DEDUP_WINDOW,
    role_tags: frozenset[str] = DEFAULT_ROLE_TAGS,
) -> list[ChatLine]:
    """Full per-session path: parse, anonymize, redact, dedup, reindex."""
    staged: list[ChatLine] = []
    for raw in raw_lines:
        candidate, text = parse_line(raw, role_tags=role_tags)
        if not text:
            continue
        if candidate is None:
            speaker, digest = UNKNOWN_SPEAKER, ""
        else:
            normalized = normalize_name(candidate)
            if normalized == SERVER_SPEAKER:
                speaker, digest = SERVER_SPEAKER, ""
            elif normalized == UNKNOWN_SPEAKER:
                speaker, digest = UNKNOWN_SPEAKER, ""
            else:
                speaker = registry.resolve(normalized)
                digest = speaker_hash(candidate, salt)
        staged.append(
            ChatLine(
                session_id=session_id,
                seq=0,
                speaker=speaker,
                text=redactor.redact(text),
                raw_speaker_hash=digest,
            )
        )
    result = []
    for seq, line in enumerate(
        dedup_lines(staged, threshold=dedup_threshold, window=dedup_window)
    ):
        line.seq = seq
        result.append(line)
    return result
