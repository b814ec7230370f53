"""HTTP service: challenge browsing, flag submission, instances, stats.

The :class:`Platform` object owns all state and implements each operation
as a plain method; the FastAPI app is a thin routing shell over it, so
every operation stays callable (and testable) without a server.

Error responses are always ``{"code", "message"}`` with a closed code
set: bad_request, not_found, quota_exceeded, driver_failure, internal.
Challenge payloads never include flag material in any form.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import flagcheck
from .config import Config
from .registry import (
    Category,
    ChallengeManifest,
    HashedFlag,
    PlaintextFlag,
    Registry,
    UnknownCategory,
    category_stats,
    ingest_archive,
    parse_category,
    query,
)
from .sandbox import (
    DEFAULT_BASE_REF,
    DriverFailure,
    InstanceHandle,
    InstanceManager,
    InstanceState,
    LocalProcessDriver,
    NotRunning,
    OciCommandDriver,
    QuotaExceeded,
    SandboxError,
    compile_build_plan,
)
from .store import AppendOutcome, InstanceAuditLog, SolveLog, SolveRecord


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _not_found(what: str) -> ApiError:
    return ApiError(404, "not_found", what)


def _endpoint_hint(kind: str, host: str, port: int) -> str:
    if kind == "tcp":
        return f"nc {host} {port}"
    if kind == "http":
        return f"http://{host}:{port}/"
    return f"ssh -p {port} user@{host}"


def _challenge_payload(manifest: ChallengeManifest) -> dict[str, Any]:
    # Flag material (plaintext, digest, platform flag) must never appear
    # here; the submit endpoint is the only consumer of the flag spec.
    return {
        "id": manifest.id,
        "event": manifest.event,
        "year": manifest.year,
        "category": manifest.category.value,
        "category_label": manifest.category.label,
        "points": manifest.points,
        "title": manifest.title,
        "description": manifest.description,
        "artifacts": list(manifest.artifacts),
        "endpoints": [{"kind": e.kind, "port": e.port} for e in manifest.endpoints],
    }


def _instance_payload(handle: InstanceHandle) -> dict[str, Any]:
    return {
        "instance_id": handle.instance_id,
        "challenge_id": handle.challenge_id,
        "state": handle.state.value,
        "endpoints": [
            {
                "kind": e.kind,
                "host": e.host,
                "port": e.port,
                "hint": _endpoint_hint(e.kind, e.host, e.port),
            }
            for e in handle.endpoints
        ],
        "workspace_mount": "/home/user",
    }


class Platform:
    """Registry + solve log + instance manager behind one operation set."""

    def __init__(
        self,
        registry: Registry,
        solves: SolveLog,
        instances: InstanceManager,
        auth_tokens: dict[str, str] | None = None,
        base_ref: str = DEFAULT_BASE_REF,
    ):
        self.registry = registry
        self.solves = solves
        self.instances = instances
        self.auth_tokens = dict(auth_tokens or {})
        self.base_ref = base_ref

    # -- auth --

    def user_for_token(self, token: str) -> str | None:
        return self.auth_tokens.get(token)

    # -- challenges --

    def handle_list(
        self,
        event: str | None = None,
        year: int | None = None,
        category: str | None = None,
    ) -> dict[str, Any]:
        cat: Category | None = None
        if category is not None:
            try:
                cat = parse_category(category)
            except UnknownCategory as exc:
                raise ApiError(400, "bad_request", str(exc)) from exc
        manifests = query(self.registry, event=event, year=year, category=cat)
        return {"challenges": [_challenge_payload(m) for m in manifests]}

    def handle_detail(self, challenge_id: str) -> dict[str, Any]:
        manifest = self.registry.get(challenge_id)
        if manifest is None:
            raise _not_found(f"no challenge {challenge_id!r}")
        return _challenge_payload(manifest)

    def artifact_path(self, challenge_id: str, artifact: str) -> Path:
        """Absolute path for a declared artifact; 404 for anything else.

        Only exact manifest entries are servable, so no request string
        can reach a file the manifest does not declare.
        """
        manifest = self.registry.get(challenge_id)
        if manifest is None:
            raise _not_found(f"no challenge {challenge_id!r}")
        if artifact not in manifest.artifacts:
            raise _not_found(f"no artifact {artifact!r} in challenge {challenge_id!r}")
        chal_dir = self.registry.dir_for(challenge_id)
        if chal_dir is None:
            raise _not_found(f"challenge {challenge_id!r} has no on-disk directory")
        path = chal_dir / artifact
        if not path.is_file():
            raise _not_found(f"artifact {artifact!r} missing on disk")
        return path

    # -- flags --

    def handle_submit(self, user_id: str, challenge_id: str, raw_flag: str) -> dict[str, Any]:
        manifest = self.registry.get(challenge_id)
        if manifest is None:
            raise _not_found(f"no challenge {challenge_id!r}")

        spec = manifest.flag_spec
        if isinstance(spec, HashedFlag):
            record = flagcheck.CheckRecord(
                algorithm=flagcheck.ALGORITHM,
                digest=spec.digest,
                platform_flag=spec.platform_flag,
                challenge_id=challenge_id,
            )
            verdict = flagcheck.verify(record, raw_flag)
        else:
            assert isinstance(spec, PlaintextFlag)
            verdict = flagcheck.verify_plaintext(spec.flag, raw_flag)

        solved_before = self.solves.has_solved(user_id, challenge_id)
        if not verdict.accepted:
            # incorrect submissions are never persisted
            return {
                "verdict": "incorrect",
                "first_solve": False,
                "solved_before": solved_before,
            }

        record_out = SolveRecord(
            user_id=user_id, challenge_id=challenge_id, timestamp=int(time.time())
        )
        try:
            outcome = self.solves.append(record_out)
        except OSError as exc:
            raise ApiError(500, "internal", f"solve log write failed: {exc}") from exc
        return {
            "verdict": "correct",
            "platform_flag": verdict.platform_flag,
            "first_solve": outcome is AppendOutcome.APPENDED,
            "solved_before": solved_before,
        }

    def handle_user_solves(self, user_id: str) -> dict[str, Any]:
        records = self.solves.records_for_user(user_id)
        return {
            "solves": [
                {"challenge_id": r.challenge_id, "timestamp": r.timestamp}
                for r in records
            ]
        }

    # -- instances --

    def handle_instance_create(self, user_id: str, challenge_id: str) -> dict[str, Any]:
        manifest = self.registry.get(challenge_id)
        if manifest is None:
            raise _not_found(f"no challenge {challenge_id!r}")
        chal_dir = self.registry.dir_for(challenge_id)
        if chal_dir is None:
            raise _not_found(f"challenge {challenge_id!r} has no on-disk directory")

        try:
            plan = compile_build_plan(manifest, chal_dir, base_ref=self.base_ref)
        except SandboxError as exc:
            # Archive defects, not client mistakes: the manifest passed
            # ingest but cannot be compiled.
            raise ApiError(500, "internal", str(exc)) from exc

        try:
            handle = self.instances.launch(user_id, manifest, plan)
        except QuotaExceeded as exc:
            raise ApiError(409, "quota_exceeded", str(exc)) from exc
        except DriverFailure as exc:
            raise ApiError(502, "driver_failure", str(exc)) from exc
        except SandboxError as exc:
            raise ApiError(400, "bad_request", str(exc)) from exc
        return _instance_payload(handle)

    def handle_instance_delete(self, user_id: str, instance_id: str) -> dict[str, Any]:
        owner = self.instances.owner_of(instance_id)
        if owner != user_id:
            # Foreign instances are indistinguishable from absent ones.
            raise _not_found(f"no instance {instance_id!r}")
        handle = self.instances.get(instance_id)
        assert handle is not None
        if handle.state is InstanceState.STOPPED:
            return _instance_payload(handle)  # delete is idempotent
        try:
            handle = self.instances.stop(instance_id)
        except NotRunning as exc:
            raise ApiError(400, "bad_request", str(exc)) from exc
        except DriverFailure as exc:
            raise ApiError(502, "driver_failure", str(exc)) from exc
        return _instance_payload(handle)

    # -- stats --

    def handle_stats(self) -> dict[str, Any]:
        rows = category_stats(self.registry, self.solves.records())
        return {
            "rows": [
                {"category": r.category, "available": r.available, "solves": r.solves}
                for r in rows
            ]
        }


def platform_from_config(cfg: Config, base_ref: str = DEFAULT_BASE_REF) -> Platform:
    registry = ingest_archive(cfg.archive_root)
    cfg.data_dir.mkdir(parents=True, exist_ok=True)
    solves = SolveLog.load(cfg.data_dir / "solves.log")
    audit = InstanceAuditLog(cfg.data_dir / "instances.log")
    if cfg.runtime_driver == "oci":
        driver = OciCommandDriver()
    else:
        driver = LocalProcessDriver()
    instances = InstanceManager(driver, cfg.data_dir, quota=1, audit=audit)
    return Platform(
        registry=registry,
        solves=solves,
        instances=instances,
        auth_tokens=cfg.auth_tokens,
        base_ref=base_ref,
    )


def build_app(platform: Platform, static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="ctf-vault", docs_url=None, redoc_url=None, openapi_url=None)

    @app.exception_handler(ApiError)
    async def _handle_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    def current_user(authorization: str = Header(default="")) -> str:
        scheme, _, token = authorization.partition(" ")
        if scheme.lower() != "bearer" or not token:
            raise ApiError(401, "bad_request", "missing bearer token")
        user = platform.user_for_token(token.strip())
        if user is None:
            raise ApiError(401, "bad_request", "unrecognized token")
        return user

    @app.get("/api/challenges")
    def list_challenges(
        event: str | None = None,
        year: int | None = None,
        category: str | None = None,
        _user: str = Depends(current_user),
    ):
        return platform.handle_list(event=event, year=year, category=category)

    @app.get("/api/challenges/{challenge_id}")
    def challenge_detail(challenge_id: str, _user: str = Depends(current_user)):
        return platform.handle_detail(challenge_id)

    @app.get("/api/challenges/{challenge_id}/artifacts/{artifact:path}")
    def download_artifact(
        challenge_id: str, artifact: str, _user: str = Depends(current_user)
    ):
        path = platform.artifact_path(challenge_id, artifact)
        return FileResponse(path, media_type="application/octet-stream")

    @app.post("/api/challenges/{challenge_id}/submit")
    async def submit_flag(
        challenge_id: str, request: Request, user: str = Depends(current_user)
    ):
        try:
            body = await request.json()
        except Exception as exc:
            raise ApiError(400, "bad_request", "request body must be JSON") from exc
        if not isinstance(body, dict) or not isinstance(body.get("flag"), str):
            raise ApiError(400, "bad_request", "body must be {\"flag\": \"...\"}")
        return platform.handle_submit(user, challenge_id, body["flag"])

    @app.post("/api/instances")
    async def create_instance(request: Request, user: str = Depends(current_user)):
        try:
            body = await request.json()
        except Exception as exc:
            raise ApiError(400, "bad_request", "request body must be JSON") from exc
        if not isinstance(body, dict) or not isinstance(body.get("challenge"), str):
            raise ApiError(400, "bad_request", "body must be {\"challenge\": \"...\"}")
        return platform.handle_instance_create(user, body["challenge"])

    @app.delete("/api/instances/{instance_id}")
    def delete_instance(instance_id: str, user: str = Depends(current_user)):
        return platform.handle_instance_delete(user, instance_id)

    @app.get("/api/users/me/solves")
    def my_solves(user: str = Depends(current_user)):
        return platform.handle_user_solves(user)

    @app.get("/api/stats/categories")
    def stats(_user: str = Depends(current_user)):
        return platform.handle_stats()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webui")

    return app
