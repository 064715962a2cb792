"""HTTP service: publish questionnaires, accept responses, return scores.

The client sees image options identified by opaque tokens; leaf values and
scoring constants never leave the server, so subjects cannot infer what a
choice contributes. Completed responses are appended to a JSONL journal
before the reply is sent; re-submitting a session returns the stored result
without writing a duplicate row.
"""

from __future__ import annotations

import hashlib
import logging
import mimetypes
import os
import re
import threading
import time
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel, Field

from .questionnaire import (Questionnaire, ResponseSheet,
                            load_questionnaire, response_from_dict,
                            score_response)

logger = logging.getLogger(__name__)

_IMAGE_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")
_IMAGE_SUFFIXES = ("", ".png", ".jpg", ".jpeg", ".gif", ".webp")


def option_token(version_id: str, trait: str, round_: int,
                 leaf_index: int) -> str:
    """Opaque, deterministic handle for one option of one question."""
    raw = f"{version_id}|{trait}|{round_}|{leaf_index}"
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


class _Version:
    """One loaded questionnaire plus its public view and token table."""

    def __init__(self, q: Questionnaire):
        self.questionnaire = q
        self.tokens: dict[str, tuple[str, int, int]] = {}
        questions = []
        for trait, section in q.traits.items():
            for question in section.questions:
                options = []
                for pos in question.display_order:
                    opt = question.options[pos]
                    token = option_token(q.version_id, trait, question.round,
                                         opt.leaf_index)
                    self.tokens[token] = (trait, question.round,
                                          opt.leaf_index)
                    options.append({
                        "token": token,
                        "image_id": opt.image_id,
                        "image_url": f"/images/{opt.image_id}",
                    })
                questions.append({
                    "trait": trait,
                    "round": question.round,
                    "concept": question.concept,
                    "options": options,
                })
        self.view = {
            "version_id": q.version_id,
            "num_questions": len(questions),
            "questions": questions,
        }
        self.question_keys = {(question["trait"], question["round"])
                              for question in questions}


class SessionStore:
    """In-memory session index over the append-only journal.

    Rebuilt from the journal at boot; the latest row per session wins, so a
    crash between append and reply never double-counts a session.
    """

    def __init__(self, journal_path: str | Path):
        self.journal_path = Path(journal_path)
        self._lock = threading.Lock()
        self._sessions: dict[str, ResponseSheet] = {}
        if self.journal_path.exists():
            import json as _json

            with open(self.journal_path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        sheet = response_from_dict(_json.loads(line))
                    except ValueError as exc:
                        logger.warning("journal %s:%d skipped: %s",
                                       self.journal_path, lineno, exc)
                        continue
                    self._sessions[sheet.subject_id] = sheet
            logger.info("journal rebuilt: %d session(s)", len(self._sessions))

    def _append(self, sheet: ResponseSheet) -> None:
        # lock held by caller; fsync so the row survives a crash before reply
        import json as _json

        from .questionnaire import response_to_dict

        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(_json.dumps(response_to_dict(sheet)) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._sessions[sheet.subject_id] = sheet

    def commit(self, sheet: ResponseSheet) -> ResponseSheet:
        """Atomically register a session: check-and-append in one step.

        Returns the stored sheet, which is the existing one when the session
        already completed (caller compares choices for conflicts), the
        amended one when only the self-rating was added, or the new sheet.
        """
        with self._lock:
            existing = self._sessions.get(sheet.subject_id)
            if existing is None:
                self._append(sheet)
                return sheet
            if existing.choices != sheet.choices:
                return existing
            if (sheet.self_rating is not None
                    and sheet.self_rating != existing.self_rating):
                amended = ResponseSheet(
                    subject_id=existing.subject_id,
                    version_id=existing.version_id,
                    choices=existing.choices,
                    self_rating=sheet.self_rating,
                    started_at=existing.started_at,
                    finished_at=existing.finished_at)
                self._append(amended)
                return amended
            return existing

    def count(self) -> int:
        with self._lock:
            return len(self._sessions)


class SubmitBody(BaseModel):
    session_id: str = Field(min_length=1, max_length=128)
    version_id: str
    choices: list[str]
    self_rating: int | None = None
    started_at: str | None = None


def create_app(questionnaire_paths: list[str | Path],
               images_dir: str | Path | None = None,
               journal_path: str | Path = "responses.jsonl",
               allow_origin: str = "*",
               ui_dir: str | Path | None = None) -> FastAPI:
    """Assemble the service around one or more questionnaire manifests."""
    if not questionnaire_paths:
        raise ValueError("need at least one questionnaire")
    versions: dict[str, _Version] = {}
    for path in questionnaire_paths:
        q = load_questionnaire(path)
        if q.version_id in versions:
            raise ValueError(f"duplicate questionnaire version {q.version_id!r}")
        versions[q.version_id] = _Version(q)
    default_version = next(iter(versions))
    store = SessionStore(journal_path)
    started = time.monotonic()

    app = FastAPI(title="vbfi service", version="1")
    app.add_middleware(CORSMiddleware, allow_origins=[allow_origin],
                       allow_methods=["*"], allow_headers=["*"])

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "questionnaire_versions": sorted(versions),
            "sessions": store.count(),
            "uptime_seconds": round(time.monotonic() - started, 3),
        }

    @app.get("/api/questionnaire")
    def get_questionnaire(version: str | None = Query(default=None)):
        version_id = version or default_version
        if version_id not in versions:
            raise HTTPException(status_code=404,
                                detail=f"unknown version {version_id!r}")
        return versions[version_id].view

    @app.post("/api/responses")
    def submit(body: SubmitBody):
        if body.version_id not in versions:
            raise HTTPException(status_code=404,
                                detail=f"unknown version {body.version_id!r}")
        ver = versions[body.version_id]
        if body.self_rating is not None and not (1 <= body.self_rating <= 7):
            raise HTTPException(status_code=400,
                                detail="self_rating must be in 1..7")

        choices: dict[tuple[str, int], int] = {}
        for token in body.choices:
            entry = ver.tokens.get(token)
            if entry is None:
                raise HTTPException(status_code=400,
                                    detail=f"invalid option token {token!r}")
            trait, round_, leaf_index = entry
            key = (trait, round_)
            if key in choices and choices[key] != leaf_index:
                raise HTTPException(
                    status_code=400,
                    detail=f"conflicting choices for trait {trait}, "
                           f"round {round_}")
            choices[key] = leaf_index
        missing = sorted(ver.question_keys - set(choices))
        if missing:
            trait, round_ = missing[0]
            raise HTTPException(
                status_code=400,
                detail=f"incomplete response: missing choice for trait "
                       f"{trait}, round {round_} "
                       f"({len(missing)} of {len(ver.question_keys)} missing)")

        sheet = ResponseSheet(
            subject_id=body.session_id,
            version_id=body.version_id,
            choices=choices,
            self_rating=body.self_rating,
            started_at=body.started_at,
            finished_at=datetime.now(timezone.utc).isoformat())
        # validate before persisting anything
        scores = score_response(ver.questionnaire, sheet)
        stored = store.commit(sheet)
        if stored.choices != choices:
            raise HTTPException(
                status_code=409,
                detail=f"session {body.session_id!r} already completed "
                       f"with different choices")
        return {"session_id": body.session_id, "scores": scores}

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        if not _IMAGE_ID_RE.match(image_id) or ".." in image_id:
            raise HTTPException(status_code=400,
                                detail="malformed image id")
        if images_dir is None:
            raise HTTPException(status_code=404, detail="no image directory")
        base = Path(images_dir).resolve()
        for suffix in _IMAGE_SUFFIXES:
            candidate = (base / f"{image_id}{suffix}").resolve()
            if base not in candidate.parents:
                raise HTTPException(status_code=400,
                                    detail="malformed image id")
            if candidate.is_file():
                media, _ = mimetypes.guess_type(candidate.name)
                return FileResponse(candidate,
                                    media_type=media or "application/octet-stream")
        raise HTTPException(status_code=404,
                            detail=f"unknown image {image_id!r}")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
