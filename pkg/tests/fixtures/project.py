"""Builds a complete fixture project: rendered recordings, session manifests,
ground-truth transcripts, and a config wired to the stub engines.

Two sessions (AdoptMe 9+, BerryAve 13+). Scripted chat gives every later
stage something to find: repeat-offender users with masked lines for the
evasion workflow, marker tokens that steer the stub classifier, a duplicated
frame for SSIM dedup, and one noisy plus one damaged frame per session to
exercise cascade stages 2 and 3.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from modaudit.config import ProjectConfig

from .render import frame_height, render_frame
from .pixelfont import GLYPH_H

STUB_OCR = Path(__file__).parent / "stub_ocr.py"

# one inner list per frame; prefix codes: "n:" noisy frame, "d:" the third
# line is damaged, "2x" frame written twice (dedup fodder)
SESSION_SCRIPTS: dict[str, dict] = {
    "s1": {
        "game": "AdoptMe",
        "age_band": "9+",
        "frames": [
            ("2x", [
                "SERVER: WELCOME TO THE GAME",
                "KIDCOOL99: ANYONE WANT TO RACE",
                "MOONPIE_4: OMG YES WAIT FOR ME",
                "BADBOY55: #### GRR",
            ]),
            ("", [
                "BADBOY55: ##### WOW 1",
                "KIDCOOL99: LETS GO TO THE CASTLE",
                "BADBOY55: ### HA NO 2",
                "MOONPIE_4: IM SO FAST TODAY",
            ]),
            ("n", [
                "BADBOY55: #### ZIP 3",
                "KIDCOOL99: WHO TOOK MY SPOT",
                "BADBOY55: ###### ARG 4",
                "MOONPIE_4: NOT ME LOL",
            ]),
            ("", [
                "BADBOY55: ### FUM 5",
                "KIDCOOL99: ZZGROOM HOW OLD R U",
                "MOONPIE_4: THAT IS WEIRD TO ASK",
                "BADBOY55: #### OOF 6",
            ]),
            ("d", [
                "BADBOY55: ##### BAH 7",
                "KIDCOOL99: ZZGROOM ADD ME ON DISC",
                "MOONPIE_4: REPORTED FOR SURE",
                "BADBOY55: ### EEK 8",
            ]),
            ("", [
                "SERVER: SHOP RESTOCK IN 5 MIN",
                "KIDCOOL99: BRB MOM IS CALLING",
                "MOONPIE_4: SAME TBH",
                "BADBOY55: WHATEVER KID",
            ]),
        ],
    },
    "s2": {
        "game": "BerryAve",
        "age_band": "13+",
        "frames": [
            ("", [
                "SERVER: WELCOME TO BERRY AVE",
                "ZETA77: NICE HAT FRIEND",
                "WARRIOR22: TY IT WAS 500",
                "CHAOS_X: #### BOO 1",
            ]),
            ("2x", [
                "CHAOS_X: ##### RAH 2",
                "ZETA77: WANT TO TRADE PETS",
                "WARRIOR22: ONLY FOR THE DOG",
                "CHAOS_X: ### GRR 3",
            ]),
            ("n", [
                "CHAOS_X: #### YIP 4",
                "ZETA77: MY CODE IS 5551234567",
                "WARRIOR22: DONT POST THAT",
                "CHAOS_X: ##### VEX 5",
            ]),
            ("", [
                "CHAOS_X: ### ZAP 6",
                "ZETA77: ZZPII WHATS UR REAL NAME",
                "WARRIOR22: STOP ASKING STUFF",
                "CHAOS_X: #### MAD 7",
            ]),
            ("d", [
                "CHAOS_X: ##### FIZZ 8",
                "ZETA77: MY YT IS FUNKID",
                "WARRIOR22: COOL CHANNEL",
                "CHAOS_X: HAHAHA FUNNY",
            ]),
            ("", [
                "SERVER: VOTE FOR THE NEXT MAP",
                "ZETA77: PICK THE BEACH ONE",
                "WARRIOR22: BEACH IS MID",
                "CHAOS_X: AHHHH WHY",
            ]),
        ],
    },
}

FRAME_WIDTH = 640


def stub_ocr_command() -> str:
    return f"{sys.executable} {STUB_OCR} {{image}}"


def expected_lines(session_id: str) -> list[str]:
    """Every scripted line, damaged ones included (= the manual transcript)."""
    lines = []
    for _, frame_lines in SESSION_SCRIPTS[session_id]["frames"]:
        lines.extend(frame_lines)
    return lines


def recoverable_lines(session_id: str) -> list[str]:
    """Lines the cascade can actually recover (damaged third lines are lost)."""
    lines = []
    for code, frame_lines in SESSION_SCRIPTS[session_id]["frames"]:
        for i, line in enumerate(frame_lines):
            if "d" in code and i == 2:
                continue
            lines.append(line)
    return lines


def build_project(
    root: Path,
    llm_url: str = "http://127.0.0.1:1/unset",
    seed: int = 7,
    sessions: dict | None = None,
) -> Path:
    root = Path(root)
    scripts = sessions or SESSION_SCRIPTS
    for session_id in sorted(scripts):
        plan = scripts[session_id]
        media = root / "media" / session_id
        media.mkdir(parents=True, exist_ok=True)
        gt_dir = root / "gt"
        gt_dir.mkdir(parents=True, exist_ok=True)

        file_idx = 0
        n_lines = len(plan["frames"][0][1])
        for frame_idx, (code, frame_lines) in enumerate(plan["frames"]):
            img = render_frame(
                frame_lines,
                width=FRAME_WIDTH,
                noise_level=0.8 if ("n" in code or "d" in code) else 0.0,
                damaged={2} if "d" in code else frozenset(),
                seed=1000 + frame_idx,
            )
            from PIL import Image

            copies = 2 if "2x" in code else 1
            for _ in range(copies):
                Image.fromarray(img).save(media / f"frame_{file_idx:06d}.png")
                file_idx += 1

        (root / "sessions").mkdir(parents=True, exist_ok=True)
        height = frame_height(n_lines)
        manifest = {
            "session_id": session_id,
            "game": plan["game"],
            "age_band": plan["age_band"],
            "source": str(Path("media") / session_id),
            "crop_rect": {"x": 0, "y": 0, "w": FRAME_WIDTH, "h": height},
        }
        (root / "sessions" / f"{session_id}.json").write_text(
            json.dumps(manifest, indent=2) + "\n"
        )
        gt = [l for _, frame_lines in plan["frames"] for l in frame_lines]
        (gt_dir / f"{session_id}.txt").write_text("\n".join(gt) + "\n")

    config = ProjectConfig(
        ocr_adapter=stub_ocr_command(),
        llm_url=llm_url,
        anonymization_salt="fixture-salt",
        sampling_seed=seed,
    )
    config.rgb_thresholds = {plan["game"]: [200, 200, 200] for plan in scripts.values()}
    config.save(root / "config.json")
    return root


def build_review_project(root: Path, seed: int = 7) -> Path:
    """Review-ready project written directly as stage outputs (no rendering).

    Eight single-conversation sessions labeled absolutely unsafe feed the
    conversation workflow; six repeat-offender users (high/medium/low in two
    games) feed the evasion workflow. Enough targets to reach saturation in
    both windows.
    """
    from modaudit.convo import CategoryVocabulary, categorize, chunk as chunk_convs
    from modaudit.modevents import annotate_lines, detect_masked_spans, profile_users
    from modaudit.pipeline import write_jsonl
    from modaudit.transcript import ChatLine

    root = Path(root)
    (root / "sessions").mkdir(parents=True, exist_ok=True)

    games = {"AdoptMe": ("9+", 1, "user_00090"), "BerryAve": ("13+", 4, "user_00091")}
    lines: list[ChatLine] = []
    session_ids = []
    s_idx = 0
    for game, (age, first_user, filler) in games.items():
        plans = [
            (f"user_{first_user:05d}", 10, 0),      # high: 10/10
            (f"user_{first_user + 1:05d}", 8, 2),   # medium: 8/10
            (f"user_{first_user + 2:05d}", 7, 8),   # low: 7/15
            (filler, 0, 12),                        # clean session
        ]
        for user, n_masked, n_clean in plans:
            s_idx += 1
            session_id = f"r{s_idx}"
            session_ids.append(session_id)
            (root / "sessions" / f"{session_id}.json").write_text(
                json.dumps(
                    {
                        "session_id": session_id,
                        "game": game,
                        "age_band": age,
                        "source": f"media/{session_id}",
                        "crop_rect": {"x": 0, "y": 0, "w": 64, "h": 64},
                    },
                    indent=2,
                )
                + "\n"
            )
            seq = 0
            for i in range(n_masked):
                lines.append(
                    ChatLine(
                        session_id=session_id,
                        seq=seq,
                        speaker=user,
                        text=f"#### mark {session_id} {i}",
                    )
                )
                seq += 1
            for i in range(n_clean):
                lines.append(
                    ChatLine(
                        session_id=session_id,
                        seq=seq,
                        speaker=user,
                        text=f"plain chat {session_id} number {i}",
                    )
                )
                seq += 1

    annotate_lines(lines)
    write_jsonl(root / "corpus" / "corpus.jsonl", [l.to_corpus_record() for l in lines])
    span_records = []
    for line in lines:
        if line.masked_spans:
            spans = detect_masked_spans(line.text)
            span_records.append(
                {"session": line.session_id, "seq": line.seq, "spans": [s.to_dict() for s in spans]}
            )
    write_jsonl(root / "modevents" / "spans.jsonl", span_records)
    profiles = profile_users(lines)
    write_jsonl(root / "modevents" / "profiles.jsonl", [p.to_dict() for p in profiles])

    meta = {
        sid: next(
            (g, a)
            for g, (a, _, _) in games.items()
            if json.loads((root / "sessions" / f"{sid}.json").read_text())["game"] == g
        )
        for sid in session_ids
    }
    conversations = chunk_convs(lines, meta)
    explanations = [
        "grooming behavior, asks to move to discord",
        "sexual content and explicit flirting",
        "bullying with repeated insults",
        "threats of violence against another player",
        "grooming with asks for age and personal information",
        "hate speech with racist slurs",
        "self harm encouragement",
        "profanity in altered spellings",
    ]
    vocab = CategoryVocabulary.default()
    for conv, expl in zip(conversations, explanations):
        conv.label = "absolutely_unsafe"
        conv.explanation = expl
        conv.categories = categorize(expl, vocab)
    write_jsonl(root / "conversations" / "conversations.jsonl", [c.to_dict() for c in conversations])
    write_jsonl(root / "conversations" / "labeled.jsonl", [c.to_dict() for c in conversations])

    from modaudit.config import ProjectConfig

    config = ProjectConfig(anonymization_salt="review-fixture", sampling_seed=seed)
    config.save(root / "config.json")
    return root
