"""Line-level similarity metrics and the ground-truth comparison harness.

The similarity between two strings is 2*M / (|a| + |b|) where M is the length
of their longest common subsequence. Ground-truth/OCR line lists are aligned
greedily (best pair first) and summarized as Recall (fraction of ground-truth
lines matched at threshold tau) and AMS (mean similarity over matched pairs).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InputError

DEFAULT_TAU = 0.8


def lcs_length(a: str, b: str) -> int:
    """Length of the longest common subsequence of ``a`` and ``b``.

    Bit-parallel algorithm: the shorter string is mapped onto the bits of a
    Python int, so arbitrary lengths come for free and the inner loop is
    O(len(longer)) word operations.
    """
    if not a or not b:
        return 0
    if len(b) < len(a):
        a, b = b, a
    n = len(a)
    masks: dict[str, int] = {}
    for i, ch in enumerate(a):
        masks[ch] = masks.get(ch, 0) | (1 << i)
    full = (1 << n) - 1
    v = full
    for ch in b:
        m = masks.get(ch, 0)
        u = v & m
        v = ((v + u) | (v & ~m)) & full
    # zero bits of v mark positions of a that participate in the LCS
    return n - bin(v).count("1")


def sim(a: str, b: str) -> float:
    """Similarity in [0, 1]; 1.0 iff the strings are equal.

    Two empty strings compare equal (1.0); exactly one empty string gives 0.0.
    """
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return 2.0 * lcs_length(a, b) / (len(a) + len(b))


@dataclass
class LinePair:
    """One ground-truth line and the OCR line it was matched to, if any."""

    gt: str
    ocr: str | None
    sim: float
    matched: bool

    def to_dict(self) -> dict:
        return {"gt": self.gt, "ocr": self.ocr, "sim": self.sim, "matched": self.matched}


@dataclass
class EvalReport:
    """Recall / AMS summary of one ground-truth comparison."""

    n_gt: int
    recall: float
    ams: float
    tau: float
    zero_matches: bool
    pairs: list[LinePair] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_gt": self.n_gt,
            "recall": self.recall,
            "ams": self.ams,
            "tau": self.tau,
            "zero_matches": self.zero_matches,
            "pairs": [p.to_dict() for p in self.pairs],
        }


def align(gt_lines: list[str], ocr_lines: list[str], tau: float = DEFAULT_TAU) -> list[LinePair]:
    """Greedy best-first one-to-one assignment of OCR lines to ground truth.

    Candidate (gt, ocr) pairs are taken in order of decreasing similarity
    (ties: lower gt index, then lower ocr index) until no remaining pair
    reaches ``tau`` or one side is exhausted. Unpaired ground-truth lines are
    reported with ``ocr=None``. Result is ordered by ground-truth index.
    """
    candidates = []
    for i, g in enumerate(gt_lines):
        for j, o in enumerate(ocr_lines):
            s = sim(g, o)
            if s >= tau:
                candidates.append((-s, i, j))
    candidates.sort()

    chosen: dict[int, tuple[int, float]] = {}
    used_ocr: set[int] = set()
    for neg_s, i, j in candidates:
        if i in chosen or j in used_ocr:
            continue
        chosen[i] = (j, -neg_s)
        used_ocr.add(j)

    pairs = []
    for i, g in enumerate(gt_lines):
        if i in chosen:
            j, s = chosen[i]
            pairs.append(LinePair(gt=g, ocr=ocr_lines[j], sim=s, matched=True))
        else:
            pairs.append(LinePair(gt=g, ocr=None, sim=0.0, matched=False))
    return pairs


def report(gt_lines: list[str], ocr_lines: list[str], tau: float = DEFAULT_TAU) -> EvalReport:
    """Align and summarize; raises InputError on an empty ground truth."""
    if not gt_lines:
        raise InputError("ground truth is empty")
    pairs = align(gt_lines, ocr_lines, tau=tau)
    matched = [p for p in pairs if p.matched]
    recall = len(matched) / len(gt_lines)
    if matched:
        ams = sum(p.sim for p in matched) / len(matched)
        zero = False
    else:
        ams = 0.0
        zero = True
    return EvalReport(
        n_gt=len(gt_lines), recall=recall, ams=ams, tau=tau, zero_matches=zero, pairs=pairs
    )
