"""Client for a locally hosted chat-completion service plus the metrics harness.

Conversations are sent to the endpoint one at a time with a standardized
four-label safety prompt at temperature 0. Replies must follow the strict
two-line ``Decision:``/``Reason:`` contract; one retry asks the model to
restate the format, after which the failure is recorded and the pipeline
moves on. Only "Absolutely SAFE" maps to the binary safe class.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

import requests

from .convo import Conversation
from .errors import InputError, TransportError, VerdictParseError

LABEL_ABS_SAFE = "Absolutely SAFE"
LABEL_POS_SAFE = "Possibly SAFE"
LABEL_POS_UNSAFE = "Possibly UNSAFE"
LABEL_ABS_UNSAFE = "Absolutely UNSAFE"
LABELS = (LABEL_ABS_SAFE, LABEL_POS_SAFE, LABEL_POS_UNSAFE, LABEL_ABS_UNSAFE)

BINARY_SAFE = "safe"
BINARY_UNSAFE = "unsafe"

FEW_SHOT_PLACEHOLDER = "<few_shot_block>"
CONVERSATION_PLACEHOLDER = "<conversation_text>"

RETRY_INSTRUCTION = (
    "Your reply did not follow the required format. Respond again with "
    "EXACTLY two lines:\nDecision: <Absolutely SAFE | Possibly SAFE | "
    "Possibly UNSAFE | Absolutely UNSAFE>\nReason: <brief explanation>"
)


def prompt_template() -> str:
    return resources.files("modaudit.assets").joinpath("classifier_prompt.txt").read_text()


def default_few_shot_block() -> str:
    return resources.files("modaudit.assets").joinpath("fewshot_examples.txt").read_text()


def binary_of(label: str) -> str:
    """Anything short of "Absolutely SAFE" counts as unsafe."""
    return BINARY_SAFE if label == LABEL_ABS_SAFE else BINARY_UNSAFE


def build_prompt(conversation_text: str, examples: str | None = None) -> str:
    """Instantiate the classification prompt for one rendered conversation."""
    if not conversation_text.strip():
        raise InputError("cannot classify an empty conversation")
    template = prompt_template()
    block = examples.strip() + "\n\n" if examples else ""
    return template.replace(FEW_SHOT_PLACEHOLDER + "\n", block).replace(
        CONVERSATION_PLACEHOLDER, conversation_text
    )


def parse_decision(reply: str) -> tuple[str, str]:
    """Extract (label, reason) from the two-line output contract."""
    label = None
    reason = ""
    for raw in reply.splitlines():
        line = raw.strip()
        if line.startswith("Decision:") and label is None:
            candidate = line[len("Decision:") :].strip()
            if candidate not in LABELS:
                raise VerdictParseError(f"unknown decision label {candidate!r}")
            label = candidate
        elif line.startswith("Reason:") and not reason:
            reason = line[len("Reason:") :].strip()
    if label is None:
        raise VerdictParseError("reply contains no Decision line")
    return label, reason


@dataclass
class EndpointConfig:
    url: str
    model: str = "local-safety-model"
    timeout: float = 120.0
    few_shot: str | None = None


@dataclass
class ClassifierVerdict:
    conv_id: str
    label: str | None
    reason: str
    binary: str | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "conv_id": self.conv_id,
            "label": self.label,
            "reason": self.reason,
            "binary": self.binary,
            "error": self.error,
        }


def _complete(endpoint: EndpointConfig, messages: list[dict]) -> str:
    payload = {"model": endpoint.model, "messages": messages, "temperature": 0}
    try:
        resp = requests.post(endpoint.url, json=payload, timeout=endpoint.timeout)
    except requests.RequestException as exc:
        raise TransportError(f"classifier endpoint unreachable: {exc}") from exc
    if resp.status_code != 200:
        raise TransportError(f"classifier endpoint returned HTTP {resp.status_code}")
    try:
        return resp.json()["choices"][0]["message"]["content"]
    except (KeyError, IndexError, ValueError) as exc:
        raise TransportError(f"malformed completion response: {exc}") from exc


def classify(conv: Conversation, endpoint: EndpointConfig) -> ClassifierVerdict:
    """One conversation through the endpoint, with a single format retry."""
    prompt = build_prompt(conv.rendered_text(), examples=endpoint.few_shot)
    messages = [{"role": "user", "content": prompt}]
    reply = _complete(endpoint, messages)
    try:
        label, reason = parse_decision(reply)
    except VerdictParseError:
        retry_messages = messages + [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": RETRY_INSTRUCTION},
        ]
        reply = _complete(endpoint, retry_messages)
        try:
            label, reason = parse_decision(reply)
        except VerdictParseError as exc:
            return ClassifierVerdict(
                conv_id=conv.conv_id, label=None, reason="", binary=None, error=str(exc)
            )
    return ClassifierVerdict(
        conv_id=conv.conv_id, label=label, reason=reason, binary=binary_of(label)
    )


def classify_many(
    conversations: Iterable[Conversation], endpoint: EndpointConfig, jobs: int = 1
) -> list[ClassifierVerdict]:
    """Bounded-parallel classification preserving input order."""
    convs = list(conversations)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda c: classify(c, endpoint), convs))
    return [classify(c, endpoint) for c in convs]


@dataclass
class EvalCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    counts: EvalCounts
    precision_defined: bool = True

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "precision_defined": self.precision_defined,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "tn": self.counts.tn,
            "fn": self.counts.fn,
        }


def score(verdicts: Iterable[ClassifierVerdict], ground_truth: dict[str, str]) -> Metrics:
    """Binary classification metrics with unsafe as the positive class.

    Every scored verdict must have a ground-truth label; verdicts that failed
    to parse are not scoreable and must be filtered out upstream.
    """
    counts = EvalCounts()
    n = 0
    for v in verdicts:
        if v.binary is None:
            raise InputError(f"verdict for {v.conv_id} has no binary label")
        truth = ground_truth.get(v.conv_id)
        if truth is None:
            raise InputError(f"no ground truth for {v.conv_id}")
        n += 1
        predicted_unsafe = v.binary == BINARY_UNSAFE
        actually_unsafe = truth == BINARY_UNSAFE
        if predicted_unsafe and actually_unsafe:
            counts.tp += 1
        elif predicted_unsafe:
            counts.fp += 1
        elif actually_unsafe:
            counts.fn += 1
        else:
            counts.tn += 1
    if n == 0:
        raise InputError("nothing to score")

    accuracy = (counts.tp + counts.tn) / n
    precision_defined = (counts.tp + counts.fp) > 0
    precision = counts.tp / (counts.tp + counts.fp) if precision_defined else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if (counts.tp + counts.fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return Metrics(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        counts=counts,
        precision_defined=precision_defined,
    )
