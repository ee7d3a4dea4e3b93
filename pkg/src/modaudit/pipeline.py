"""Stage implementations over a persistent project directory.

Each stage consumes the previous stage's subdirectory, writes only its own,
and records a machine-readable run manifest (digests of inputs, config, and
outputs). Reruns with unchanged inputs produce byte-identical outputs, so
digests double as a reproducibility check.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import modevents as me
from .config import ProjectConfig
from .convo import CategoryVocabulary, Conversation, categorize, chunk
from .errors import InputError, MissingStageError
from .imgproc import (
    RgbThreshold,
    VariantSet,
    make_variants,
    suppress_background,
)
from .ingest import RecordingSession, dedup_frames, extract_frames, load_image_rgb, save_image_rgb
from .llmfilter import EndpointConfig, classify_many, default_few_shot_block
from .ocr import CascadeThresholds, CommandAdapter, cascade
from .sampler import ReviewSession, Stratum, WINDOW_CONVERSATIONS, WINDOW_USERS
from .textmetrics import report
from .transcript import (
    ChatLine,
    PseudonymRegistry,
    Redactor,
    assemble_lines,
)

WORKFLOW_CONVERSATIONS = "rq1"
WORKFLOW_USERS = "rq2"


def write_jsonl(path: Path, records: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def tree_digests(root: Path, base: Path) -> dict[str, str]:
    if not root.exists():
        return {}
    return {
        str(p.relative_to(base)): sha256_file(p)
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@dataclass
class Project:
    """Paths and config for one pipeline run directory."""

    root: Path
    config: ProjectConfig

    @classmethod
    def open(cls, root: Path, config_path: Path | None = None) -> "Project":
        root = Path(root)
        path = Path(config_path) if config_path else root / "config.json"
        config = ProjectConfig.load(path) if path.exists() else ProjectConfig()
        config.validate()
        return cls(root=root, config=config)

    def dir(self, name: str) -> Path:
        return self.root / name

    def sessions(self) -> list[RecordingSession]:
        sess_dir = self.dir("sessions")
        if not sess_dir.is_dir():
            raise MissingStageError("ingest", "a sessions/ directory with session manifests")
        sessions = []
        for path in sorted(sess_dir.glob("*.json")):
            sessions.append(RecordingSession.from_manifest(json.loads(path.read_text()), base_dir=self.root))
        if not sessions:
            raise MissingStageError("ingest", "at least one sessions/*.json manifest")
        ids = [s.session_id for s in sessions]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise InputError(f"duplicate session ids in manifests: {duplicates}")
        return sessions

    def session_meta(self) -> dict[str, tuple[str, str]]:
        return {s.session_id: (s.game, s.age_band) for s in self.sessions()}

    def require(self, path: Path, stage: str, needed: str) -> Path:
        if not path.exists():
            raise MissingStageError(stage, needed)
        return path

    def write_manifest(self, stage: str, inputs: dict[str, str], outputs: dict[str, str]) -> None:
        runs = self.dir("runs")
        runs.mkdir(parents=True, exist_ok=True)
        manifest = {
            "stage": stage,
            "config_digest": hashlib.sha256(self.config.to_json().encode()).hexdigest(),
            "inputs": inputs,
            "outputs": outputs,
        }
        (runs / f"{stage}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def stage_ingest(project: Project) -> dict:
    """Recordings -> deduplicated cropped frame PNGs plus per-session index."""
    import shutil

    sessions = project.sessions()
    out_root = project.dir("frames")
    inputs = tree_digests(project.dir("sessions"), project.root)
    summary = {}
    for session in sessions:
        # extraction scratch stays inside the project root
        scratch = project.dir("tmp") / f"extract_{session.session_id}"
        frames = extract_frames(
            session,
            extractor_cmd=project.config.extractor_cmd or None,
            workdir=scratch if not session.source.is_dir() else None,
        )
        kept = list(dedup_frames(frames, threshold=project.config.ssim_dedup_threshold))
        sdir = out_root / session.session_id
        sdir.mkdir(parents=True, exist_ok=True)
        index = []
        for frame in kept:
            name = f"frame_{frame.seq:06d}.png"
            save_image_rgb(sdir / name, frame.image)
            index.append({"seq": frame.seq, "file": name, "wall_offset_ms": frame.wall_offset_ms})
        write_jsonl(sdir / "index.jsonl", index)
        summary[session.session_id] = len(kept)
    if project.dir("tmp").exists():
        shutil.rmtree(project.dir("tmp"))
    project.write_manifest("ingest", inputs, tree_digests(out_root, project.root))
    return summary


def _frame_paths(project: Project, session_id: str) -> list[tuple[int, Path]]:
    sdir = project.dir("frames") / session_id
    index = read_jsonl(sdir / "index.jsonl")
    return [(rec["seq"], sdir / rec["file"]) for rec in index]


def stage_variants(project: Project) -> dict:
    """Frames -> the 6 OCR variants plus the background-suppressed image."""
    frames_root = project.require(
        project.dir("frames"), "variants", "ingest"
    )
    inputs = tree_digests(frames_root, project.root)
    out_root = project.dir("variants")
    summary = {}
    meta = project.session_meta()
    for session_id in sorted(meta):
        game, _ = meta[session_id]
        thr = RgbThreshold(*project.config.rgb_for(game))
        count = 0
        for seq, path in _frame_paths(project, session_id):
            image = load_image_rgb(path)
            vdir = out_root / session_id / f"{seq:06d}"
            vdir.mkdir(parents=True, exist_ok=True)
            vs = make_variants(image, origin=f"{session_id}:{seq}")
            for tag, img in vs.variants:
                from PIL import Image

                Image.fromarray(img, mode="L").save(vdir / f"{tag}.png", format="PNG")
            suppressed = suppress_background(
                image, thr, invert_predicate=project.config.suppression_invert_predicate
            )
            save_image_rgb(vdir / "suppressed.png", suppressed)
            count += 1
        summary[session_id] = count
    project.write_manifest("variants", inputs, tree_digests(out_root, project.root))
    return summary


def _load_variant_set(vdir: Path, origin: str) -> VariantSet:
    from PIL import Image

    variants = []
    for tag in ("grayscale", "grayscale_inv", "blur", "blur_inv", "otsu", "otsu_inv"):
        with Image.open(vdir / f"{tag}.png") as im:
            variants.append((tag, np.asarray(im.convert("L"))))
    suppressed = load_image_rgb(vdir / "suppressed.png")
    return VariantSet(origin=origin, variants=variants, suppressed_origin=suppressed)


def cascade_thresholds(config: ProjectConfig) -> CascadeThresholds:
    return CascadeThresholds(
        stage_conf=config.cascade_stage_conf,
        consistency_tau=config.cascade_consistency_tau,
        line_median=config.cascade_line_median,
        line_mean=config.cascade_line_mean,
    )


def stage_ocr(project: Project, jobs: int = 1) -> dict:
    """Variant sets -> per-frame cascade outcomes."""
    variants_root = project.require(project.dir("variants"), "ocr", "variants")
    if not project.config.ocr_adapter:
        raise InputError("config.ocr_adapter is empty; set the engine command template")
    adapter = CommandAdapter(project.config.ocr_adapter)
    thresholds = cascade_thresholds(project.config)
    inputs = tree_digests(variants_root, project.root)
    out_root = project.dir("ocr")
    summary = {}
    for session_id in sorted(project.session_meta()):
        outcomes = []
        for seq, _ in _frame_paths(project, session_id):
            vdir = variants_root / session_id / f"{seq:06d}"
            vs = _load_variant_set(vdir, origin=f"{session_id}:{seq}")
            outcome = cascade(f"{session_id}:{seq}", vs, adapter, thresholds, jobs=jobs)
            doc = outcome.to_dict()
            doc["seq"] = seq
            outcomes.append(doc)
        write_jsonl(out_root / f"{session_id}.jsonl", outcomes)
        summary[session_id] = sum(1 for o in outcomes if o["stage"] != "rejected")
    project.write_manifest("ocr", inputs, tree_digests(out_root, project.root))
    return summary


def stage_transcribe(project: Project) -> dict:
    """Cascade outcomes -> ordered raw text lines (still identifying; kept
    under private/)."""
    ocr_root = project.require(project.dir("ocr"), "transcribe", "ocr")
    inputs = tree_digests(ocr_root, project.root)
    out_root = project.dir("private") / "raw"
    out_root.mkdir(parents=True, exist_ok=True)
    os.chmod(project.dir("private"), 0o700)
    summary = {}
    for session_id in sorted(project.session_meta()):
        outcomes = read_jsonl(ocr_root / f"{session_id}.jsonl")
        records = []
        for outcome in sorted(outcomes, key=lambda o: o["seq"]):
            for line in outcome["lines"]:
                records.append({"frame_seq": outcome["seq"], "raw": line})
        path = out_root / f"{session_id}.jsonl"
        write_jsonl(path, records)
        os.chmod(path, 0o600)
        summary[session_id] = len(records)
    project.write_manifest("transcribe", inputs, tree_digests(out_root, project.root))
    return summary


def stage_anonymize(project: Project) -> dict:
    """Raw lines -> anonymized corpus plus the private mapping file."""
    raw_root = project.require(project.dir("private") / "raw", "anonymize", "transcribe")
    inputs = tree_digests(raw_root, project.root)
    registry = PseudonymRegistry()
    corpus: list[ChatLine] = []
    for session_id in sorted(project.session_meta()):
        records = read_jsonl(raw_root / f"{session_id}.jsonl")
        redactor = Redactor(project.config.handle_keywords)
        lines = assemble_lines(
            session_id,
            [r["raw"] for r in records],
            registry,
            redactor,
            salt=project.config.anonymization_salt,
            dedup_threshold=project.config.text_dedup_threshold,
            dedup_window=project.config.text_dedup_window,
        )
        corpus.extend(lines)

    corpus_root = project.dir("corpus")
    write_jsonl(corpus_root / "corpus.jsonl", [l.to_corpus_record() for l in corpus])
    private = project.dir("private")
    private.mkdir(parents=True, exist_ok=True)
    os.chmod(private, 0o700)
    mapping = private / "mapping.jsonl"
    write_jsonl(mapping, registry.mapping_records())
    os.chmod(mapping, 0o600)
    outputs = tree_digests(corpus_root, project.root)
    project.write_manifest("anonymize", inputs, outputs)
    return {"lines": len(corpus), "identities": len(registry.entries)}


def load_corpus(project: Project, stage: str) -> list[ChatLine]:
    path = project.require(project.dir("corpus") / "corpus.jsonl", stage, "anonymize")
    return [
        ChatLine(
            session_id=rec["session"],
            seq=rec["seq"],
            speaker=rec["speaker"],
            text=rec["text"],
        )
        for rec in read_jsonl(path)
    ]


def stage_modevents(project: Project) -> dict:
    """Corpus -> masked spans, user profiles, frequency ranking."""
    lines = load_corpus(project, "modevents")
    inputs = tree_digests(project.dir("corpus"), project.root)
    me.annotate_lines(
        lines,
        merge_adjacent=project.config.merge_adjacent_masked,
        exclusion_words=frozenset(w.casefold() for w in project.config.mask_exclusion_words),
    )
    out_root = project.dir("modevents")
    span_records = []
    for line in lines:
        if not line.masked_spans:
            continue
        spans = me.detect_masked_spans(
            line.text,
            merge_adjacent=project.config.merge_adjacent_masked,
            exclusion_words=frozenset(w.casefold() for w in project.config.mask_exclusion_words),
        )
        span_records.append(
            {
                "session": line.session_id,
                "seq": line.seq,
                "spans": [s.to_dict() for s in spans],
            }
        )
    write_jsonl(out_root / "spans.jsonl", span_records)
    profiles = me.profile_users(lines)
    write_jsonl(out_root / "profiles.jsonl", [p.to_dict() for p in profiles])
    ranking = me.rank_frequency(profiles)
    (out_root / "ranking.json").write_text(
        json.dumps([{"pseudonym": p, "masked_lines": m} for p, m in ranking], indent=2) + "\n"
    )
    project.write_manifest("modevents", inputs, tree_digests(out_root, project.root))
    return {"masked_lines": len(span_records), "profiles": len(profiles)}


def stage_chunk(project: Project) -> dict:
    """Corpus plus span annotations -> 50-line conversations."""
    lines = load_corpus(project, "chunk")
    spans_path = project.require(
        project.dir("modevents") / "spans.jsonl", "chunk", "modevents"
    )
    inputs = {
        **tree_digests(project.dir("corpus"), project.root),
        **tree_digests(project.dir("modevents"), project.root),
    }
    span_map = {
        (rec["session"], rec["seq"]): [(s["start"], s["length"]) for s in rec["spans"]]
        for rec in read_jsonl(spans_path)
    }
    for line in lines:
        line.masked_spans = span_map.get((line.session_id, line.seq), [])
    conversations = chunk(lines, project.session_meta())
    out_root = project.dir("conversations")
    write_jsonl(out_root / "conversations.jsonl", [c.to_dict() for c in conversations])
    project.write_manifest("chunk", inputs, tree_digests(out_root, project.root))
    return {"conversations": len(conversations)}


def load_conversations(project: Project, stage: str, labeled: bool = False) -> list[Conversation]:
    name = "labeled.jsonl" if labeled else "conversations.jsonl"
    needed = "classify" if labeled else "chunk"
    path = project.require(project.dir("conversations") / name, stage, needed)
    return [Conversation.from_dict(doc) for doc in read_jsonl(path)]


def stage_classify(project: Project, jobs: int = 1) -> dict:
    """Conversations through the safety classifier; labels plus categories."""
    conversations = load_conversations(project, "classify")
    inputs = tree_digests(project.dir("conversations"), project.root)
    endpoint = EndpointConfig(
        url=project.config.llm_url,
        model=project.config.llm_model,
        timeout=project.config.llm_timeout,
        few_shot=default_few_shot_block() if project.config.llm_few_shot else None,
    )
    verdicts = classify_many(conversations, endpoint, jobs=jobs)
    vocabulary = CategoryVocabulary.default()
    labeled = []
    label_map = {
        "Absolutely UNSAFE": "absolutely_unsafe",
        "Possibly UNSAFE": "possibly_unsafe",
        "Possibly SAFE": "possibly_safe",
        "Absolutely SAFE": "absolutely_safe",
    }
    for conv, verdict in zip(conversations, verdicts):
        if verdict.label is not None:
            conv.label = label_map[verdict.label]
            conv.explanation = verdict.reason
            conv.categories = categorize(verdict.reason, vocabulary)
        labeled.append(conv)

    out_root = project.dir("verdicts")
    write_jsonl(out_root / "verdicts.jsonl", [v.to_dict() for v in verdicts])
    write_jsonl(
        project.dir("conversations") / "labeled.jsonl", [c.to_dict() for c in labeled]
    )
    outputs = {
        **tree_digests(out_root, project.root),
        **tree_digests(project.dir("conversations"), project.root),
    }
    project.write_manifest("classify", inputs, outputs)
    unsafe = sum(1 for c in labeled if c.label == "absolutely_unsafe")
    errors = sum(1 for v in verdicts if v.error)
    return {"conversations": len(labeled), "absolutely_unsafe": unsafe, "parse_errors": errors}


def stage_eval(project: Project, ground_truth_dir: Path) -> dict:
    """Accepted OCR lines vs. manual transcripts -> Recall / AMS report."""
    ocr_root = project.require(project.dir("ocr"), "eval", "ocr")
    gt_dir = Path(ground_truth_dir)
    if not gt_dir.is_dir():
        raise InputError(f"ground-truth directory {gt_dir} does not exist")
    inputs = tree_digests(ocr_root, project.root)
    per_session = {}
    all_gt: list[str] = []
    all_ocr: list[str] = []
    for gt_path in sorted(gt_dir.glob("*.txt")):
        session_id = gt_path.stem
        gt_lines = [l for l in gt_path.read_text().splitlines() if l.strip()]
        outcome_path = ocr_root / f"{session_id}.jsonl"
        ocr_lines: list[str] = []
        if outcome_path.exists():
            for outcome in sorted(read_jsonl(outcome_path), key=lambda o: o["seq"]):
                ocr_lines.extend(outcome["lines"])
        rep = report(gt_lines, ocr_lines, tau=project.config.tau)
        per_session[session_id] = {"recall": rep.recall, "ams": rep.ams, "n_gt": rep.n_gt}
        all_gt.extend(gt_lines)
        all_ocr.extend(ocr_lines)
    if not all_gt:
        raise InputError(f"no *.txt ground-truth files in {gt_dir}")
    overall = report(all_gt, all_ocr, tau=project.config.tau)
    out_root = project.dir("eval")
    out_root.mkdir(parents=True, exist_ok=True)
    doc = {
        "overall": {"recall": overall.recall, "ams": overall.ams, "n_gt": overall.n_gt},
        "per_session": per_session,
        "tau": project.config.tau,
    }
    (out_root / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    project.write_manifest("eval", inputs, tree_digests(out_root, project.root))
    return doc["overall"]


def user_game_map(project: Project, lines: list[ChatLine] | None = None) -> dict[str, str]:
    """Game each user is reviewed under: the one with most of their masked
    lines (ties to the lexicographically first game)."""
    spans = read_jsonl(project.dir("modevents") / "spans.jsonl")
    masked_keys = {(rec["session"], rec["seq"]) for rec in spans}
    meta = project.session_meta()
    lines = lines if lines is not None else load_corpus(project, "sample")
    counts: dict[str, dict[str, int]] = {}
    for line in lines:
        if (line.session_id, line.seq) not in masked_keys:
            continue
        game = meta.get(line.session_id, ("Other", ""))[0]
        per_user = counts.setdefault(line.speaker, {})
        per_user[game] = per_user.get(game, 0) + 1
    return {
        user: min((-(n), g) for g, n in games.items())[1] for user, games in counts.items()
    }


def build_strata(project: Project, workflow: str) -> list[Stratum]:
    """rq1: absolutely-unsafe conversations by (game, age band). rq2: review-
    candidate users by (game, frequency level)."""
    if workflow == WORKFLOW_CONVERSATIONS:
        conversations = load_conversations(project, "sample", labeled=True)
        pools: dict[str, list[str]] = {}
        for conv in conversations:
            if conv.label != "absolutely_unsafe":
                continue
            pools.setdefault(f"{conv.game}|{conv.age_band}", []).append(conv.conv_id)
        return [Stratum(key=k, pool=sorted(pools[k])) for k in sorted(pools)]
    if workflow == WORKFLOW_USERS:
        profile_path = project.require(
            project.dir("modevents") / "profiles.jsonl", "sample", "modevents"
        )
        profiles = read_jsonl(profile_path)
        games = user_game_map(project)
        pools = {}
        for prof in profiles:
            if prof["stratum"] not in ("high", "medium", "low"):
                continue
            game = games.get(prof["pseudonym"], "Other")
            pools.setdefault(f"{game}|{prof['stratum']}", []).append(prof["pseudonym"])
        return [Stratum(key=k, pool=sorted(pools[k])) for k in sorted(pools)]
    raise InputError(f"unknown workflow {workflow!r} (expected rq1 or rq2)")


def review_window(workflow: str) -> int:
    return WINDOW_CONVERSATIONS if workflow == WORKFLOW_CONVERSATIONS else WINDOW_USERS


def open_review_session(project: Project, workflow: str) -> ReviewSession:
    """ReviewSession for a workflow, restored from its persisted logs."""
    from .sampler import AnnotationRecord

    strata = build_strata(project, workflow)
    session = ReviewSession(
        strata, window=review_window(workflow), seed=project.config.sampling_seed
    )
    draws_path = project.dir("sampling") / workflow / "draws.jsonl"
    ann_path = project.dir("annotations") / f"{workflow}.jsonl"
    draw_log = [rec["target"] for rec in read_jsonl(draws_path)] if draws_path.exists() else []
    records = (
        [AnnotationRecord.from_dict(rec) for rec in read_jsonl(ann_path)]
        if ann_path.exists()
        else []
    )
    if draw_log or records:
        session.restore(draw_log, records)
    return session


def persist_review_session(project: Project, workflow: str, session: ReviewSession) -> None:
    write_jsonl(
        project.dir("sampling") / workflow / "draws.jsonl",
        [{"target": t} for t in session.draw_log],
    )
    ann_dir = project.dir("annotations")
    ann_dir.mkdir(parents=True, exist_ok=True)
    write_jsonl(ann_dir / f"{workflow}.jsonl", [r.to_dict() for r in session.tracker.log])


def stage_sample(project: Project, workflow: str) -> dict:
    """Draw one per-stratum iteration and persist the updated draw log."""
    session = open_review_session(project, workflow)
    inputs = tree_digests(project.dir("conversations"), project.root)
    before = len(session.draw_log)
    target = session.next_target()
    persist_review_session(project, workflow, session)
    project.write_manifest(
        "sample", inputs, tree_digests(project.dir("sampling"), project.root)
    )
    return {
        "workflow": workflow,
        "next_target": target,
        "new_draws": session.draw_log[before:],
        "saturated": session.tracker.saturated,
    }
