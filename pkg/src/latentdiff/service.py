"""HTTP facade for interactive exploration.

Sessions hold an editable job draft; every mutation is validated before
it lands, so a draft is always runnable. Mock-backend generation is
synchronous (it is sub-second, and the steering loop wants immediate
feedback); anything else is submitted to a bounded worker pool and
polled. State can be mirrored to an append-only JSON-lines file and
rebuilt from it on boot, with preview bytes regenerated on demand from
the recorded jobs since generation is deterministic.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse

from .backends import get_backend
from .errors import BackendUnavailable, LatentDiffError
from .field_map import build_field_map, fieldmap_to_text
from .jobs import (
    GenerationJob,
    job_digest,
    job_from_dict,
    job_to_dict,
    validate_job,
)
from .mock_backend import BACKEND_ID as MOCK_BACKEND_ID
from .pipeline import predicted_counters
from .runner import build_pipeline, run_generation
from .tensors import latent_digest

DEFAULT_FIELDMAP_CAP = 33
PREVIEW_MEDIA_TYPE = "image/x-portable-graymap"

OPERATOR_CATALOG = {
    "operators": [
        {
            "kind": "identity",
            "arity": 1,
            "params": None,
            "doc": "pass the single input through unchanged",
        },
        {
            "kind": "lerp",
            "arity": 2,
            "params": {"alpha": "number; weights become [1-alpha, alpha]"},
            "doc": "straight-line blend of two inputs",
        },
        {
            "kind": "slerp",
            "arity": 2,
            "params": {"alpha": "number; weights become [1-alpha, alpha]"},
            "doc": "great-circle blend preserving vector norm",
        },
        {
            "kind": "affine",
            "arity": "n >= 1, one weight per input",
            "params": {"weights": "list of numbers summing to 1 (within 1e-6)"},
            "doc": "weighted combination; weights outside [0,1] extrapolate",
        },
    ],
    "modes": ["query_wise", "feature_wise"],
    "weight_rule": "weights must sum to 1; no silent renormalization",
}

DEFAULT_DRAFT = {
    "version": 1,
    "backend": MOCK_BACKEND_ID,
    "seed": 0,
    "steps": 5,
    "mode": "query_wise",
    "prompts": ["a single test subject"],
    "controls": [],
    "concept_op": {"kind": "identity"},
    "shape_op": None,
}


@dataclass
class SessionRecord:
    session_id: str
    job: GenerationJob
    history: list[str] = field(default_factory=list)
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def to_json(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "draft": job_to_dict(self.job),
            "history": list(self.history),
            "created": self.created,
            "updated": self.updated,
        }


@dataclass
class ResultRecord:
    result_id: str
    session_id: str
    job: GenerationJob
    status: str = "pending"
    digest: str = ""
    latent_digest: str | None = None
    counters: dict[str, int] | None = None
    timings: dict[str, float] | None = None
    error: str | None = None
    preview: bytes | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "result_id": self.result_id,
            "session_id": self.session_id,
            "status": self.status,
            "digest": self.digest,
            "latent_digest": self.latent_digest,
            "counters": self.counters,
            "timings": self.timings,
            "error": self.error,
            "preview_url": f"/results/{self.result_id}/preview",
            "job": job_to_dict(self.job),
        }


class ServiceState:
    """Everything behind the routes: stores, locks, worker pool, and the
    optional persistence log."""

    def __init__(
        self,
        state_file: str | Path | None = None,
        workers: int | None = None,
        fieldmap_cap: int = DEFAULT_FIELDMAP_CAP,
    ):
        self.sessions: dict[str, SessionRecord] = {}
        self.results: dict[str, ResultRecord] = {}
        self.fieldmap_cache: dict[tuple[str, str, int], str] = {}
        self.registry_lock = threading.Lock()
        self.fieldmap_cap = fieldmap_cap
        self.executor = ThreadPoolExecutor(max_workers=workers or 4)
        self.state_path = Path(state_file) if state_file else None
        self.state_lock = threading.Lock()
        if self.state_path is not None and self.state_path.exists():
            self._restore()

    # - persistence -

    def _append_event(self, event: dict[str, Any]) -> None:
        if self.state_path is None:
            return
        line = json.dumps(event, sort_keys=True, separators=(",", ":"))
        with self.state_lock:
            with self.state_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def _restore(self) -> None:
        for line in self.state_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                continue
            kind = event.get("event")
            try:
                if kind == "session":
                    job, _ = job_from_dict(event["draft"])
                    record = SessionRecord(
                        session_id=event["id"],
                        job=job,
                        history=list(event.get("history", [])),
                        created=event.get("created", time.time()),
                        updated=event.get("updated", time.time()),
                    )
                    self.sessions[record.session_id] = record
                elif kind == "result":
                    job, _ = job_from_dict(event["job"])
                    self.results[event["rid"]] = ResultRecord(
                        result_id=event["rid"],
                        session_id=event["session_id"],
                        job=job,
                        status=event.get("status", "done"),
                        digest=event.get("digest", ""),
                        latent_digest=event.get("latent_digest"),
                        counters=event.get("counters"),
                        timings=event.get("timings"),
                        error=event.get("error"),
                    )
            except (KeyError, LatentDiffError):
                continue

    def persist_session(self, record: SessionRecord) -> None:
        self._append_event(
            {
                "event": "session",
                "id": record.session_id,
                "draft": job_to_dict(record.job),
                "history": list(record.history),
                "created": record.created,
                "updated": record.updated,
            }
        )

    def persist_result(self, record: ResultRecord) -> None:
        self._append_event(
            {
                "event": "result",
                "rid": record.result_id,
                "session_id": record.session_id,
                "job": job_to_dict(record.job),
                "status": record.status,
                "digest": record.digest,
                "latent_digest": record.latent_digest,
                "counters": record.counters,
                "timings": record.timings,
                "error": record.error,
            }
        )

    # - lookups -

    def session(self, session_id: str) -> SessionRecord:
        record = self.sessions.get(session_id)
        if record is None:
            raise HTTPException(
                404,
                detail={"error": "UnknownSession", "message": f"no session {session_id!r}"},
            )
        return record

    def result(self, result_id: str) -> ResultRecord:
        record = self.results.get(result_id)
        if record is None:
            raise HTTPException(
                404,
                detail={"error": "UnknownResult", "message": f"no result {result_id!r}"},
            )
        return record


def _domain_error(exc: LatentDiffError) -> HTTPException:
    status = 503 if isinstance(exc, BackendUnavailable) else 422
    detail: dict[str, Any] = {"error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "field", None):
        detail["field"] = exc.field
    return HTTPException(status, detail=detail)


def _run_result(state: ServiceState, record: ResultRecord) -> None:
    """Execute a result record's job and fill it in; used sync and async."""
    try:
        backend = get_backend(record.job.backend_id)
        outcome = run_generation(backend, record.job)
    except LatentDiffError as exc:
        record.status = "failed"
        record.error = f"{type(exc).__name__}: {exc}"
        state.persist_result(record)
        return
    record.status = "done"
    record.digest = outcome.job_digest
    record.latent_digest = latent_digest(outcome.final_latent)
    record.counters = outcome.hook_counters
    record.timings = {k: round(v, 6) for k, v in outcome.timings.items()}
    record.preview = outcome.preview_bytes
    state.persist_result(record)


def _predicted_counters(job: GenerationJob) -> dict[str, int] | None:
    try:
        topology = get_backend(job.backend_id).topology
    except BackendUnavailable:
        return None
    return predicted_counters(build_pipeline(topology, job))


def create_app(
    state_file: str | Path | None = None,
    cors_origin: str | None = None,
    workers: int | None = None,
    fieldmap_cap: int = DEFAULT_FIELDMAP_CAP,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Build the application. All stores are per-app, so tests can spin
    up isolated instances freely."""
    app = FastAPI(title="latentdiff explorer service")
    state = ServiceState(state_file=state_file, workers=workers, fieldmap_cap=fieldmap_cap)
    app.state.store = state

    if cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(LatentDiffError)
    async def handle_domain_error(request: Request, exc: LatentDiffError):
        http = _domain_error(exc)
        return JSONResponse(status_code=http.status_code, content={"detail": http.detail})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/operators")
    def operators():
        return OPERATOR_CATALOG

    @app.post("/sessions", status_code=201)
    def create_session():
        job, _ = job_from_dict(DEFAULT_DRAFT)
        record = SessionRecord(session_id=uuid.uuid4().hex[:12], job=job)
        with state.registry_lock:
            state.sessions[record.session_id] = record
        state.persist_session(record)
        return record.to_json()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return state.session(session_id).to_json()

    @app.put("/sessions/{session_id}/job")
    async def update_draft(session_id: str, request: Request):
        record = state.session(session_id)
        try:
            patch = await request.json()
        except json.JSONDecodeError as exc:
            raise HTTPException(
                422, detail={"error": "ParseError", "message": f"body is not JSON: {exc}"}
            )
        if not isinstance(patch, dict):
            raise HTTPException(
                422, detail={"error": "SchemaError", "message": "body must be a JSON object"}
            )
        with record.lock:
            merged = job_to_dict(record.job)
            merged.update(patch)
            merged["version"] = 1
            try:
                job, _ = job_from_dict(merged)
                validate_job(job)
                try:
                    topology = get_backend(job.backend_id).topology
                except BackendUnavailable:
                    topology = None
                if topology is not None:
                    validate_job(job, topology)
            except LatentDiffError as exc:
                raise _domain_error(exc)
            record.job = job
            record.updated = time.time()
            state.persist_session(record)
            return {
                "session_id": record.session_id,
                "draft": job_to_dict(job),
                "digest": job_digest(job),
                "predicted_counters": _predicted_counters(job),
            }

    @app.post("/sessions/{session_id}/generate")
    def generate(session_id: str, response: Response):
        record = state.session(session_id)
        with record.lock:
            job = record.job
            result = ResultRecord(
                result_id=uuid.uuid4().hex[:12],
                session_id=session_id,
                job=job,
                digest=job_digest(job),
            )
            with state.registry_lock:
                state.results[result.result_id] = result
            record.history.append(result.result_id)
            record.updated = time.time()
            if job.backend_id == MOCK_BACKEND_ID:
                _run_result(state, result)
                state.persist_session(record)
                if result.status == "failed":
                    raise HTTPException(
                        422,
                        detail={"error": "GenerationFailed", "message": result.error or ""},
                    )
                return result.to_json()
            # External backends may not even exist on this machine; probe
            # before promising a pending result.
            try:
                get_backend(job.backend_id)
            except BackendUnavailable as exc:
                record.history.pop()
                with state.registry_lock:
                    state.results.pop(result.result_id, None)
                raise _domain_error(exc)
            state.persist_session(record)
            state.executor.submit(_run_result, state, result)
            response.status_code = 202
            return {
                "result_id": result.result_id,
                "status": "pending",
                "poll_url": f"/results/{result.result_id}",
            }

    @app.get("/results/{result_id}")
    def get_result(result_id: str):
        return state.result(result_id).to_json()

    @app.get("/results/{result_id}/preview")
    def get_preview(result_id: str):
        record = state.result(result_id)
        if record.status != "done":
            raise HTTPException(
                409,
                detail={"error": "NotReady", "message": f"result is {record.status}"},
            )
        if record.preview is None:
            # Restored from the state log: regenerate deterministically.
            backend = get_backend(record.job.backend_id)
            outcome = run_generation(backend, record.job)
            record.preview = outcome.preview_bytes
        return Response(content=record.preview, media_type=PREVIEW_MEDIA_TYPE)

    @app.get("/sessions/{session_id}/fieldmap")
    def get_fieldmap(session_id: str, axis: str = "concept", resolution: int = 9):
        record = state.session(session_id)
        if resolution > state.fieldmap_cap:
            raise HTTPException(
                422,
                detail={
                    "error": "BadResolution",
                    "message": f"resolution {resolution} exceeds the server cap {state.fieldmap_cap}",
                    "field": "resolution",
                },
            )
        with record.lock:
            job = record.job
            reg = (
                job.concept_registration if axis == "concept" else job.shape_registration
            )
            if reg is not None and reg.spec.kind == "identity":
                raise HTTPException(
                    422,
                    detail={
                        "error": "ValidationError",
                        "message": "identity operator has no weight axis to map; "
                        "switch the draft to lerp, slerp or affine",
                        "field": "axis",
                    },
                )
            key = (job_digest(job), axis, resolution)
            cached = state.fieldmap_cache.get(key)
            if cached is None:
                try:
                    field_map = build_field_map(job, axis, resolution)
                except LatentDiffError as exc:
                    raise _domain_error(exc)
                cached = fieldmap_to_text(field_map)
                state.fieldmap_cache[key] = cached
            return Response(content=cached, media_type="application/json")

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def default_ui_dir() -> Path | None:
    """The built frontend bundle, when present in a source checkout."""
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None
