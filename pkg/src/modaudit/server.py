"""HTTP review API consumed by the annotation UI.

Endpoints:
  GET  /api/next-sample?workflow=rq1|rq2   current pending target (idempotent)
  GET  /api/conversations/{conv_id}        full conversation with spans
  GET  /api/users/{pseudonym}/timeline     chronological masked/unmasked feed
  POST /api/annotations                    submit codes for the pending target
  GET  /api/saturation?workflow=...        live saturation state

All truth lives in the project directory; the server replays it on startup
and persists after every mutation, so clients can reconstruct their whole
screen from reads alone.
"""
from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .errors import DuplicateAnnotation, InputError, PipelineError, PoolsExhausted
from .pipeline import (
    Project,
    WORKFLOW_CONVERSATIONS,
    WORKFLOW_USERS,
    load_conversations,
    load_corpus,
    open_review_session,
    persist_review_session,
    read_jsonl,
)
from .sampler import AnnotationRecord, VERDICT_FALSE_POSITIVE, VERDICT_TRUE_POSITIVE


class AnnotationIn(BaseModel):
    workflow: str = Field(pattern="^(rq1|rq2)$")
    annotator: str
    target: str
    codes: list[str] = []
    interpretable: bool
    verdict: str | None = None


def create_app(project: Project) -> FastAPI:
    app = FastAPI(title="chat moderation review API")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    lock = threading.Lock()
    sessions: dict[str, object] = {}

    conversations = {
        c.conv_id: c for c in load_conversations(project, "serve", labeled=True)
    }
    corpus = load_corpus(project, "serve")
    span_map = {
        (rec["session"], rec["seq"]): rec["spans"]
        for rec in read_jsonl(project.dir("modevents") / "spans.jsonl")
    }
    meta = project.session_meta()

    def session_for(workflow: str):
        if workflow not in (WORKFLOW_CONVERSATIONS, WORKFLOW_USERS):
            raise HTTPException(status_code=400, detail=f"unknown workflow {workflow!r}")
        if workflow not in sessions:
            try:
                sessions[workflow] = open_review_session(project, workflow)
            except PipelineError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
        return sessions[workflow]

    def timeline_for(pseudonym: str) -> list[dict]:
        rows = []
        for line in corpus:
            if line.speaker != pseudonym:
                continue
            spans = span_map.get((line.session_id, line.seq), [])
            rows.append(
                {
                    "session": line.session_id,
                    "seq": line.seq,
                    "game": meta.get(line.session_id, ("Other", ""))[0],
                    "text": line.text,
                    "masked": bool(spans),
                    "spans": spans,
                }
            )
        return rows

    def conversation_payload(conv_id: str) -> dict:
        conv = conversations.get(conv_id)
        if conv is None:
            raise HTTPException(status_code=404, detail=f"no conversation {conv_id!r}")
        return conv.to_dict()

    def target_payload(workflow: str, target: str) -> dict:
        if workflow == WORKFLOW_CONVERSATIONS:
            return {
                "workflow": workflow,
                "kind": "conversation",
                "target_id": target,
                "conversation": conversation_payload(target),
            }
        return {
            "workflow": workflow,
            "kind": "user",
            "target_id": target,
            "timeline": timeline_for(target),
        }

    @app.get("/api/next-sample")
    def next_sample(workflow: str = WORKFLOW_CONVERSATIONS):
        with lock:
            session = session_for(workflow)
            try:
                target = session.next_target()
            except PoolsExhausted:
                return {"workflow": workflow, "exhausted": True}
            persist_review_session(project, workflow, session)
        payload = target_payload(workflow, target)
        payload["saturation"] = session.tracker.state().to_dict()
        payload["exhausted"] = False
        return payload

    @app.get("/api/conversations/{conv_id}")
    def get_conversation(conv_id: str):
        return conversation_payload(conv_id)

    @app.get("/api/users/{pseudonym}/timeline")
    def get_timeline(pseudonym: str):
        rows = timeline_for(pseudonym)
        if not rows:
            raise HTTPException(status_code=404, detail=f"no messages for {pseudonym!r}")
        return {"pseudonym": pseudonym, "messages": rows}

    @app.post("/api/annotations", status_code=201)
    def post_annotation(annotation: AnnotationIn):
        if not annotation.codes and annotation.verdict != VERDICT_FALSE_POSITIVE:
            raise HTTPException(
                status_code=400,
                detail="submission needs at least one code or an explicit fp verdict",
            )
        if annotation.verdict not in (None, VERDICT_TRUE_POSITIVE, VERDICT_FALSE_POSITIVE):
            raise HTTPException(status_code=400, detail="verdict must be tp or fp")
        with lock:
            session = session_for(annotation.workflow)
            record = AnnotationRecord(
                annotator=annotation.annotator,
                target=annotation.target,
                codes=sorted(set(annotation.codes)),
                interpretable=annotation.interpretable,
                verdict=annotation.verdict,
            )
            try:
                state = session.submit(record)
            except DuplicateAnnotation as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except InputError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            persist_review_session(project, annotation.workflow, session)
        return {"workflow": annotation.workflow, "saturation": state.to_dict()}

    @app.get("/api/saturation")
    def get_saturation(workflow: str = WORKFLOW_CONVERSATIONS):
        with lock:
            session = session_for(workflow)
            remaining = sum(len(s.remaining()) for s in session.strata)
            doc = session.tracker.state().to_dict()
        doc["workflow"] = workflow
        doc["pool_remaining"] = remaining
        doc["pending"] = session.pending_targets()
        return doc

    return app
