"""HTTP review service: scan sessions, human decisions, confirmed apply.

The one rule that matters: nothing mutates the backlog without a
confirmation. Interactive sessions apply only items a user accepted or
modified; auto sessions record blanket acceptance up front and exist to
reproduce unattended runs.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field as dc_field
from datetime import datetime
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .dedup import (
    CandidateStatus,
    DraftingFailedError,
    DuplicateCandidate,
    EngineConfig,
    TooFewIssuesError,
    cluster_accepted,
    detect_duplicates,
    propose_resolution,
)
from .embedding import EmbeddingClient
from .errors import GroomerError
from .evaluation import (
    GroundTruth,
    expand_clusters,
    metrics,
    report_row,
    score,
)
from .gateway import Gateway, PartialFailureError
from .model import (
    BacklogSnapshot,
    CreateIssue,
    IssuePair,
    MergeCluster,
    format_timestamp,
    utc_now,
)
from .suggest import (
    ChatConfig,
    ChatProvider,
    IssueSuggestion,
    SuggestionRequest,
    make_chat_provider,
    make_merge_drafter,
    suggest_new_issues,
)

INTERACTIVE = "interactive"
AUTO = "auto"

PROPOSED = "Proposed"
ACCEPTED = "Accepted"
REJECTED = "Rejected"
MODIFIED = "Modified"

_VERDICTS = {"accept": ACCEPTED, "reject": REJECTED, "modify": MODIFIED}


class ApiError(Exception):
    """Maps straight onto the wire error shape {error, message}."""

    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(message)
        self.status_code = status_code
        self.code = code
        self.message = message


@dataclass
class ReviewItem:
    """A candidate or suggestion plus its review state."""

    item_id: str
    status: str = PROPOSED
    candidate: DuplicateCandidate | None = None
    suggestion: IssueSuggestion | None = None
    edited_summary: str | None = None
    edited_description: str | None = None
    decided_at: datetime | None = None

    def to_dict(self) -> dict:
        base: dict = {"id": self.item_id, "status": self.status}
        if self.edited_summary is not None:
            base["edited_summary"] = self.edited_summary
            base["edited_description"] = self.edited_description
        return base


@dataclass
class ReviewSession:
    session_id: str
    mode: str
    snapshot: BacklogSnapshot
    threshold: float
    candidates: list[ReviewItem]
    suggestions: list[ReviewItem] = dc_field(default_factory=list)
    decision_log: list[dict] = dc_field(default_factory=list)
    started_at: datetime = dc_field(default_factory=utc_now)
    applied_at: datetime | None = None
    receipts: list[dict] = dc_field(default_factory=list)
    predicted_pairs: list[tuple[str, str]] = dc_field(default_factory=list)

    @property
    def applied(self) -> bool:
        return self.applied_at is not None

    def find_item(self, target: str) -> ReviewItem | None:
        for item in self.candidates + self.suggestions:
            if item.item_id == target:
                return item
        return None

    def candidate_dicts(self) -> list[dict]:
        rows = []
        for item in self.candidates:
            candidate = item.candidate
            assert candidate is not None
            a = self.snapshot.get(candidate.pair.a)
            b = self.snapshot.get(candidate.pair.b)
            row = item.to_dict()
            row.update(
                {
                    "pair": {"a": candidate.pair.a, "b": candidate.pair.b},
                    "a_summary": a.summary if a else "",
                    "b_summary": b.summary if b else "",
                    "score": candidate.score,
                    "proposed_action": (
                        candidate.proposed_action.to_dict()
                        if candidate.proposed_action
                        else None
                    ),
                }
            )
            rows.append(row)
        return rows

    def suggestion_dicts(self) -> list[dict]:
        rows = []
        for item in self.suggestions:
            suggestion = item.suggestion
            assert suggestion is not None
            row = item.to_dict()
            row.update(
                {
                    "summary": suggestion.summary,
                    "description": suggestion.description,
                    "rationale": suggestion.rationale,
                    "redundancy_score": suggestion.redundancy_score,
                }
            )
            rows.append(row)
        return rows

    def summary_dict(self) -> dict:
        return {
            "id": self.session_id,
            "mode": self.mode,
            "project_key": self.snapshot.project_key,
            "issue_count": len(self.snapshot),
            "threshold": self.threshold,
            "candidate_count": len(self.candidates),
            "suggestion_count": len(self.suggestions),
            "started_at": format_timestamp(self.started_at),
            "applied_at": format_timestamp(self.applied_at) if self.applied_at else None,
            "decision_count": len(self.decision_log),
        }


class ReviewService:
    """Owns sessions and serializes mutations per session."""

    def __init__(
        self,
        gateway: Gateway,
        embedder: EmbeddingClient,
        engine_config: EngineConfig | None = None,
        chat_config: ChatConfig | None = None,
        chat_provider: ChatProvider | None = None,
        truth: GroundTruth | None = None,
        clock: Callable[[], datetime] = utc_now,
        session_dump_dir: str | Path | None = None,
    ):
        self.gateway = gateway
        self.embedder = embedder
        self.engine_config = engine_config or EngineConfig()
        self.chat_config = chat_config or ChatConfig()
        self.chat_provider = chat_provider or make_chat_provider(self.chat_config)
        self.truth = truth
        self.clock = clock
        self.session_dump_dir = Path(session_dump_dir) if session_dump_dir else None
        self._sessions: dict[str, ReviewSession] = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._counter = 0

    # -- session lifecycle ------------------------------------------------

    def list_sessions(self) -> list[dict]:
        with self._registry_lock:
            sessions = list(self._sessions.values())
        return [session.summary_dict() for session in sessions]

    def get_session(self, session_id: str) -> ReviewSession:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._session_locks[session_id]

    def start_session(self, mode: str, threshold: float | None = None) -> ReviewSession:
        if mode not in (INTERACTIVE, AUTO):
            raise ApiError(400, "bad_mode", f"mode must be interactive or auto, got {mode!r}")
        cut = self.engine_config.duplicate_threshold if threshold is None else threshold
        if not 0.0 < cut <= 1.0:
            raise ApiError(400, "bad_threshold", f"threshold must be in (0, 1], got {cut}")

        snapshot = self.gateway.fetch_backlog()
        try:
            candidates = detect_duplicates(
                snapshot, self.engine_config, self.embedder, threshold=cut
            )
        except TooFewIssuesError as exc:
            raise ApiError(409, "too_few_issues", str(exc)) from exc

        with self._registry_lock:
            self._counter += 1
            session_id = f"sess-{self._counter:04d}"
            items = []
            for position, candidate in enumerate(candidates, start=1):
                status = PROPOSED
                if mode == AUTO:
                    status = ACCEPTED
                    candidate.status = CandidateStatus.ACCEPTED
                items.append(
                    ReviewItem(
                        item_id=f"cand-{position:04d}",
                        status=status,
                        candidate=candidate,
                    )
                )
            session = ReviewSession(
                session_id=session_id,
                mode=mode,
                snapshot=snapshot,
                threshold=cut,
                candidates=items,
                started_at=self.clock(),
            )
            self._sessions[session_id] = session
            self._session_locks[session_id] = threading.Lock()
        return session

    # -- decisions ---------------------------------------------------------

    def record_decision(
        self,
        session_id: str,
        target: str,
        verdict: str,
        edited_payload: dict | None = None,
        actor: str = "user",
    ) -> ReviewItem:
        session = self.get_session(session_id)
        with self._lock_for(session_id):
            if session.applied:
                raise ApiError(
                    409, "session_already_applied", "decisions are closed after apply"
                )
            if verdict not in _VERDICTS:
                raise ApiError(400, "bad_verdict", f"unknown verdict {verdict!r}")
            item = session.find_item(target)
            if item is None:
                raise ApiError(404, "unknown_target", f"no item {target!r} in session")
            status = _VERDICTS[verdict]
            if status == MODIFIED:
                summary = (edited_payload or {}).get("summary", "")
                if not isinstance(summary, str) or not summary.strip():
                    raise ApiError(
                        400,
                        "missing_edited_payload",
                        "modify needs edited_payload with a non-empty summary",
                    )
                item.edited_summary = summary.strip()
                item.edited_description = str((edited_payload or {}).get("description", ""))
            item.status = status
            item.decided_at = self.clock()
            if item.candidate is not None:
                item.candidate.status = (
                    CandidateStatus.REJECTED
                    if status == REJECTED
                    else CandidateStatus.ACCEPTED
                    if status in (ACCEPTED, MODIFIED)
                    else CandidateStatus.PROPOSED
                )
            session.decision_log.append(
                {
                    "timestamp": format_timestamp(item.decided_at),
                    "actor": actor,
                    "target": target,
                    "verdict": verdict,
                }
            )
            return item

    # -- suggestions -------------------------------------------------------

    def request_suggestions(
        self, session_id: str, user_prompt: str = "", max_suggestions: int = 5
    ) -> list[ReviewItem]:
        session = self.get_session(session_id)
        with self._lock_for(session_id):
            if session.applied:
                raise ApiError(
                    409, "session_already_applied", "session is read-only after apply"
                )
            request = SuggestionRequest(
                project_description=f"Backlog of project {session.snapshot.project_key}",
                issue_digest=tuple(
                    (issue.key, issue.summary) for issue in session.snapshot.issues
                ),
                user_prompt=user_prompt,
                max_suggestions=max_suggestions,
            )
            suggestions = suggest_new_issues(
                request,
                session.snapshot,
                self.embedder,
                self.engine_config,
                self.chat_config,
                provider=self.chat_provider,
            )
            start = len(session.suggestions)
            new_items = [
                ReviewItem(item_id=f"sugg-{start + offset:04d}", suggestion=suggestion)
                for offset, suggestion in enumerate(suggestions, start=1)
            ]
            session.suggestions.extend(new_items)
            return new_items

    # -- apply ---------------------------------------------------------------

    def _merge_actions(self, session: ReviewSession) -> list[MergeCluster]:
        accepted_items = [
            item
            for item in session.candidates
            if item.status in (ACCEPTED, MODIFIED) and item.candidate is not None
        ]
        accepted = [item.candidate for item in accepted_items]
        clusters = cluster_accepted(accepted, session.snapshot, self.engine_config)  # type: ignore[arg-type]
        drafter = make_merge_drafter(self.chat_config, self.chat_provider)

        actions = []
        for cluster in clusters:
            override = self._edited_override(session, accepted_items, cluster.members)
            if override is not None:
                summary, description = override
                absorbed = tuple(
                    key for key in sorted(cluster.members) if key != cluster.survivor
                )
                actions.append(
                    MergeCluster(
                        survivor=cluster.survivor,
                        absorbed=absorbed,
                        summary=summary,
                        description=description,
                    )
                )
                continue
            try:
                actions.append(propose_resolution(cluster, session.snapshot, drafter))
            except DraftingFailedError:
                actions.append(propose_resolution(cluster, session.snapshot, None))
        return actions

    @staticmethod
    def _edited_override(
        session: ReviewSession,
        accepted_items: list[ReviewItem],
        members: frozenset[str],
    ) -> tuple[str, str] | None:
        latest: ReviewItem | None = None
        for item in accepted_items:
            if item.status != MODIFIED or item.candidate is None:
                continue
            if item.candidate.pair.a in members:
                if latest is None or (
                    item.decided_at and latest.decided_at and item.decided_at > latest.decided_at
                ):
                    latest = item
        if latest is None or latest.edited_summary is None:
            return None
        return latest.edited_summary, latest.edited_description or ""

    def apply_session(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        with self._lock_for(session_id):
            if session.applied:
                raise ApiError(409, "session_already_applied", "session was already applied")

            merge_actions = self._merge_actions(session)
            create_actions = []
            for item in session.suggestions:
                if item.status not in (ACCEPTED, MODIFIED) or item.suggestion is None:
                    continue
                summary = item.edited_summary or item.suggestion.summary
                description = (
                    item.edited_description
                    if item.edited_summary is not None
                    else item.suggestion.description
                )
                create_actions.append(
                    CreateIssue(summary=summary, description=description or "")
                )
            if not merge_actions and not create_actions:
                raise ApiError(
                    409, "nothing_to_apply", "no accepted or modified items to apply"
                )

            receipts = []
            try:
                for action in [*merge_actions, *create_actions]:
                    receipts.append(self.gateway.apply_action(action).to_dict())
            except PartialFailureError as exc:
                receipts.append(exc.receipt.to_dict())
                raise ApiError(
                    502,
                    "partial_failure",
                    f"apply failed part-way; session left open for retry: {exc}",
                ) from exc

            session.applied_at = self.clock()
            session.receipts = receipts
            session.predicted_pairs = sorted(
                (pair.a, pair.b)
                for pair in expand_clusters(
                    [action.absorbed + (action.survivor,) for action in merge_actions]
                )
            )
            if self.session_dump_dir is not None:
                self._dump_session(session)
            return self.report(session_id)

    def report(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        if not session.applied:
            raise ApiError(409, "not_applied", "session has not been applied yet")
        assert session.applied_at is not None
        time_seconds = (session.applied_at - session.started_at).total_seconds()
        payload = {
            "session": session.summary_dict(),
            "time_seconds": time_seconds,
            "receipts": session.receipts,
            "predicted_pairs": [list(pair) for pair in session.predicted_pairs],
            "metrics": None,
        }
        if self.truth is not None:
            predicted = {IssuePair(a, b) for a, b in session.predicted_pairs}
            cm = score(predicted, self.truth)
            report = metrics(cm, time_seconds)
            payload["metrics"] = report_row(session.session_id, cm, report)
        return payload

    def _dump_session(self, session: ReviewSession) -> None:
        assert self.session_dump_dir is not None
        self.session_dump_dir.mkdir(parents=True, exist_ok=True)
        path = self.session_dump_dir / f"{session.session_id}.json"
        payload = {
            "session": session.summary_dict(),
            "candidates": session.candidate_dicts(),
            "suggestions": session.suggestion_dicts(),
            "decision_log": session.decision_log,
            "receipts": session.receipts,
            "predicted_pairs": [list(p) for p in session.predicted_pairs],
        }
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def create_app(service: ReviewService, static_dir: str | Path | None = None) -> FastAPI:
    """Wire the review service into the HTTP+JSON API."""
    app = FastAPI(title="backlog-groomer review service", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def on_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.code, "message": exc.message},
        )

    @app.exception_handler(GroomerError)
    async def on_groomer_error(_request: Request, exc: GroomerError) -> JSONResponse:
        return JSONResponse(
            status_code=502,
            content={"error": "backend_error", "message": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(
        _request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": "bad_request", "message": str(exc.errors()[:1])},
        )

    @app.get("/api/sessions")
    def list_sessions() -> list[dict]:
        return service.list_sessions()

    @app.post("/api/sessions", status_code=201)
    def create_session(body: dict | None = None) -> dict:
        body = body or {}
        session = service.start_session(
            mode=body.get("mode", INTERACTIVE),
            threshold=body.get("threshold"),
        )
        return session.summary_dict()

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session = service.get_session(session_id)
        payload = session.summary_dict()
        payload["decision_log"] = session.decision_log
        return payload

    @app.get("/api/sessions/{session_id}/candidates")
    def get_candidates(session_id: str) -> list[dict]:
        return service.get_session(session_id).candidate_dicts()

    @app.get("/api/sessions/{session_id}/suggestions")
    def get_suggestions(session_id: str) -> list[dict]:
        return service.get_session(session_id).suggestion_dicts()

    @app.post("/api/sessions/{session_id}/decisions")
    def post_decision(session_id: str, body: dict) -> dict:
        item = service.record_decision(
            session_id,
            target=str(body.get("target", "")),
            verdict=str(body.get("verdict", "")),
            edited_payload=body.get("edited_payload"),
            actor=str(body.get("actor", "user")),
        )
        return item.to_dict()

    @app.post("/api/sessions/{session_id}/suggestions")
    def post_suggestions(session_id: str, body: dict | None = None) -> list[dict]:
        body = body or {}
        service.request_suggestions(
            session_id,
            user_prompt=str(body.get("user_prompt", "")),
            max_suggestions=int(body.get("max_suggestions", 5)),
        )
        return service.get_session(session_id).suggestion_dicts()

    @app.post("/api/sessions/{session_id}/apply")
    def post_apply(session_id: str) -> dict:
        return service.apply_session(session_id)

    @app.get("/api/sessions/{session_id}/report")
    def get_report(session_id: str) -> dict:
        return service.report(session_id)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
