"""HTTP+JSON service tying ingestion, recognition, repository, soundscape,
and the game loop together for concurrent clients.

All endpoints live under /v1 and are thin projections of the module
operations; response shapes are pinned by the JSON schemas in
docs/schemas/. Authenticated routes take `Authorization: Bearer
<token>`, and the desk-scale static scheme maps the token itself to the
user id. Error bodies are {code, message, retryable}.
"""

from __future__ import annotations

import json
import sys
from datetime import timedelta
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .audio import Annotation
from .classifier import load_templates, save_templates
from .config import ServerConfig
from .errors import (
    AccessDeniedError,
    InvalidParameterError,
    MalformedAudioError,
    QuestError,
    RecognitionUnavailableError,
)
from .gamification import GameEngine
from .geo import GeoPoint, TileKey
from .recognition import (
    MODE_ON_EDGE,
    MODE_SERVICE,
    build_default_templates,
    decode_request,
    decode_response,
    encode_response,
    recognize,
)
from .repository import Detection, DetectionRepository
from .soundscape import build_scene
from .timeutil import now_utc, parse_utc
from .wavio import MAX_RATE, MIN_RATE, load_wav


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.retryable = retryable

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"code": self.code, "message": self.message, "retryable": self.retryable},
        )


class AppState:
    """Wiring of the module stack behind the API."""

    def __init__(self, config: ServerConfig):
        self.config = config
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        self.repo = DetectionRepository(data_dir, min_confidence=config.confidence_threshold)
        self.engine = GameEngine.open(data_dir)
        templates_path = data_dir / "templates.json"
        if templates_path.exists():
            self.templates, self.classifier_config = load_templates(templates_path)
        else:
            from .classifier import DEFAULT_CLASSIFIER

            self.templates = build_default_templates(DEFAULT_CLASSIFIER)
            self.classifier_config = DEFAULT_CLASSIFIER
            save_templates(templates_path, self.templates, self.classifier_config)

    def close(self) -> None:
        self.repo.close()


def _auth_user(request: Request) -> str:
    header = request.headers.get("authorization", "")
    if not header.lower().startswith("bearer ") or not header[7:].strip():
        raise ApiError(401, "unauthenticated", "missing or malformed bearer token")
    return header[7:].strip()


def _parse_window(from_: Optional[str], to: Optional[str]):
    lo = parse_utc(from_) if from_ else None
    hi = parse_utc(to) if to else None
    if lo is not None and hi is not None and lo > hi:
        raise ApiError(400, "invalid_time_range", f"from {from_!r} is after to {to!r}")
    return lo, hi


def _geo_or_error(lat: float, lon: float) -> GeoPoint:
    try:
        return GeoPoint(lat, lon)
    except InvalidParameterError as exc:
        raise ApiError(400, "invalid_coordinates", str(exc)) from exc


def create_app(state: AppState) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        print(
            f"birdscape server listening on http://{state.config.host}:{state.config.port}",
            file=sys.stderr,
            flush=True,
        )
        yield
        state.close()

    app = FastAPI(title="birdscape", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.birdscape = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return ApiError(400, "invalid_request", str(exc)).response()

    @app.exception_handler(InvalidParameterError)
    async def _invalid_param(request: Request, exc: InvalidParameterError):
        return ApiError(400, "invalid_parameter", str(exc)).response()

    @app.get("/health")
    def health():
        return {"status": "ok", "detections": len(state.repo)}

    # ------------------------------------------------------------- ingest

    @app.post("/v1/recordings")
    async def post_recording(request: Request):
        user = _auth_user(request)
        form = await request.form()
        if "audio" not in form or "meta" not in form:
            raise ApiError(400, "invalid_request", "multipart parts 'audio' and 'meta' required")
        audio_part = form["audio"]
        payload = await audio_part.read() if hasattr(audio_part, "read") else bytes(audio_part, "utf-8")
        try:
            meta = json.loads(form["meta"] if isinstance(form["meta"], str) else await form["meta"].read())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ApiError(400, "invalid_meta", f"meta is not valid JSON: {exc}") from exc
        return _handle_submission(state, user, payload, meta)

    # -------------------------------------------------------------- scene

    @app.get("/v1/scene")
    def get_scene(
        response: Response,
        lat: float,
        lon: float,
        heading: float = 0.0,
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = None,
        species: Optional[str] = None,
    ):
        position = _geo_or_error(lat, lon)
        window = _parse_window(from_, to)
        scene = build_scene(
            state.repo, position, heading, window, species, state.config.max_scene_sources
        )
        response.headers["Cache-Control"] = "no-store"
        return scene.to_dict()

    # -------------------------------------------------------------- tiles

    @app.get("/v1/tiles/{z}/{x}/{y}")
    def get_tile(
        z: int,
        x: int,
        y: int,
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = None,
        species: Optional[str] = None,
    ):
        try:
            tile = TileKey(z, x, y)
        except InvalidParameterError as exc:
            raise ApiError(400, "invalid_tile", str(exc)) from exc
        window = _parse_window(from_, to)
        counts = state.repo.species_counts_in_tile(tile, window, species)
        return {
            "zoom": z,
            "x": x,
            "y": y,
            "counts": dict(sorted(counts.items())),
            "total": sum(counts.values()),
        }

    # --------------------------------------------------------------- game

    @app.get("/v1/quests")
    def get_quests(request: Request):
        user = _auth_user(request)
        return {"quests": [q.to_dict() for q in state.engine.available_quests(user)]}

    @app.post("/v1/quests/{quest_id}/accept")
    def accept_quest(quest_id: str, request: Request):
        user = _auth_user(request)
        try:
            return state.engine.accept_quest(user, quest_id)
        except QuestError as exc:
            message = str(exc)
            if "unknown quest" in message:
                raise ApiError(404, "unknown_quest", message) from exc
            if "locked" in message:
                raise ApiError(403, "quest_locked", message) from exc
            raise ApiError(409, "quest_conflict", message) from exc

    @app.get("/v1/profile")
    def get_profile(request: Request):
        user = _auth_user(request)
        return state.engine.profile(user)

    @app.get("/v1/species/{species_id}/bank")
    def get_bank(species_id: str, request: Request):
        user = _auth_user(request)
        try:
            refs = state.repo.species_bank(species_id, user, state.engine.bank_unlocked)
        except AccessDeniedError as exc:
            raise ApiError(403, "badge_required", str(exc)) from exc
        return {"species_id": species_id, "clip_refs": refs}

    @app.get("/v1/clips/{ref}")
    def get_clip(ref: str, request: Request):
        _auth_user(request)
        path = state.repo.clips.root / f"{ref}.wav"
        if not path.exists():
            raise ApiError(404, "unknown_clip", f"clip {ref!r} not found")
        return Response(content=path.read_bytes(), media_type="audio/wav")

    # --------------------------------------------------------- trajectory

    @app.get("/v1/trajectory/{species_id}")
    def get_trajectory(
        species_id: str,
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = None,
        bucket_days: float = 7.0,
    ):
        if bucket_days <= 0:
            raise ApiError(400, "invalid_parameter", "bucket_days must be positive")
        window = _parse_window(from_, to)
        traj = state.repo.trajectory(species_id, window, timedelta(days=bucket_days))
        return traj.to_dict()

    # -------------------------------------------------- recognitionremote

    @app.post("/v1/recognize")
    async def recognize_service(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError as exc:
            raise ApiError(400, "invalid_request", f"body is not JSON: {exc}") from exc
        mel, _, _ = decode_request(payload)
        from .classifier import classify_clip

        result = classify_clip(mel, state.templates, state.classifier_config)
        return encode_response(result)

    return app


def _handle_submission(state: AppState, user: str, payload: bytes, meta: dict) -> dict:
    try:
        clip = load_wav(payload)
    except MalformedAudioError as exc:
        raise ApiError(400, "malformed_audio", str(exc)) from exc
    if not (MIN_RATE <= clip.sample_rate <= MAX_RATE):
        raise ApiError(
            400, "unsupported_rate", f"sample rate {clip.sample_rate} outside [{MIN_RATE}, {MAX_RATE}]"
        )
    try:
        annotation = Annotation.from_dict(meta["annotation"])
        annotation.validate_within(clip)
        position = _geo_or_error(float(meta["lat"]), float(meta["lon"]))
        timestamp = parse_utc(meta["timestamp"])
        mode = meta.get("mode", MODE_SERVICE)
    except (KeyError, TypeError, ValueError) as exc:
        raise ApiError(400, "invalid_meta", f"bad submission metadata: {exc}") from exc
    except InvalidParameterError as exc:
        raise ApiError(400, "invalid_meta", str(exc)) from exc
    if timestamp > now_utc():
        raise ApiError(400, "invalid_timestamp", "client timestamp is in the future")

    if mode == MODE_ON_EDGE:
        # Edge delivery: the client classified locally and submits its result.
        if "classification" not in meta:
            raise ApiError(400, "invalid_meta", "on-edge submissions must include a classification")
        try:
            classification = decode_response(meta["classification"])
        except InvalidParameterError as exc:
            raise ApiError(400, "invalid_meta", str(exc)) from exc
    elif mode == MODE_SERVICE:
        try:
            classification = recognize(
                clip,
                state.templates,
                mode=MODE_SERVICE if state.config.recognition_endpoint else MODE_ON_EDGE,
                config=state.classifier_config,
                endpoint=state.config.recognition_endpoint,
                fallback_enabled=True,
            )
        except RecognitionUnavailableError as exc:
            raise ApiError(503, "recognition_unavailable", str(exc), retryable=True) from exc
    else:
        raise ApiError(400, "invalid_meta", f"mode must be 'on-edge' or 'service', got {mode!r}")

    species_id, score = classification.top1
    body = {
        "status": "accepted",
        "detection_id": None,
        "classification": classification.to_dict(),
        "reward": None,
    }
    if score < state.config.confidence_threshold:
        body["status"] = "low_confidence"
        return body
    clip_ref = state.repo.clips.add(clip)
    detection = Detection.create(
        species_id=species_id,
        confidence=score,
        timestamp=timestamp,
        geo=position,
        annotation=annotation,
        clip_ref=clip_ref,
        submitter=user,
    )
    try:
        detection_id = state.repo.insert(detection)
    except InvalidParameterError as exc:
        raise ApiError(400, "rejected", str(exc)) from exc
    except OSError as exc:
        raise ApiError(500, "store_failure", str(exc), retryable=True) from exc
    already_counted = any(
        e.get("detection_id") == detection_id for e in state.engine.events(user) if e["type"] == "submission"
    )
    if already_counted:
        reward = None
    else:
        reward = state.engine.record_submission(user, detection).to_dict()
    body["detection_id"] = detection_id
    body["reward"] = reward
    return body
