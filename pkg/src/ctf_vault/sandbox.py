"""Deterministic container build plans and instance lifecycle management.

Compilation is pure: manifest plus directory listing in, build plan out.
The same inputs must produce a byte-identical rendered recipe on every
run and every platform, so path handling is POSIX-only and step order is
fixed by the manifest, never by filesystem enumeration.

Two drivers execute plans: an OCI driver that shells out to a container
engine, and an in-process driver for tests and demos that fakes "running"
challenges with loopback TCP listeners.
"""

from __future__ import annotations

import hashlib
import posixpath
import re
import socket
import subprocess
import threading
import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence, Union

from .registry import ChallengeManifest
from .store import InstanceAuditLog

DEFAULT_BASE_REF = "ctf-vault/base:latest"
WORKSPACE_MOUNT = "/home/user"
CHALLENGE_ROOT = "/challenge"

USER_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class SandboxError(Exception):
    pass


class PathEscape(SandboxError):
    """An artifact or source path points outside the challenge directory."""


class NoContent(SandboxError):
    """Nothing to build: no sources, no artifacts, no endpoints."""


class DriverFailure(SandboxError):
    """The underlying runtime failed to build, start, or stop."""


class QuotaExceeded(SandboxError):
    """The user already has their allowed number of running instances."""


class NotRunning(SandboxError):
    """Lifecycle operation requires a running instance."""


# --- build plans ------------------------------------------------------------


@dataclass(frozen=True)
class CopyIn:
    src: str  # relative to the challenge directory
    dst: str  # absolute inside the image


@dataclass(frozen=True)
class Run:
    command: str


@dataclass(frozen=True)
class Entrypoint:
    command: str


BuildStep = Union[CopyIn, Run, Entrypoint]


@dataclass(frozen=True)
class BuildPlan:
    challenge_id: str
    base_ref: str
    stages: tuple[BuildStep, ...]
    exposed_ports: tuple[tuple[str, int], ...]  # (kind, port), sorted
    workspace_mount: str
    context_dir: Path
    upstream_recipe: str | None = None


def _reject_escape(path: str, what: str) -> str:
    if "\\" in path:
        raise PathEscape(f"{what} path must use forward slashes: {path!r}")
    if path.startswith("/"):
        raise PathEscape(f"{what} path must be relative: {path!r}")
    normalized = posixpath.normpath(path)
    if normalized == ".." or normalized.startswith("../"):
        raise PathEscape(f"{what} path escapes the challenge directory: {path!r}")
    return path


def _artifact_dst(artifact: str) -> str:
    # Handouts conventionally live under dist/; the image layout drops
    # that prefix so /challenge holds the served files directly.
    inner = artifact[len("dist/"):] if artifact.startswith("dist/") else artifact
    return posixpath.join(CHALLENGE_ROOT, inner)


def compile_build_plan(
    manifest: ChallengeManifest,
    chal_dir: Path,
    base_ref: str = DEFAULT_BASE_REF,
) -> BuildPlan:
    """Derive a build plan from a manifest and its challenge directory.

    An upstream ``src/Dockerfile`` wins: its text is carried verbatim and
    no steps are synthesized. Otherwise artifacts are copied in manifest
    order, a whole ``dist/`` or ``src/`` tree is copied when present, and
    the first tcp endpoint gets a socat entrypoint serving the first
    copied file (or ``/bin/cat`` when there is nothing to serve).

    Raises :class:`PathEscape` on traversal attempts and
    :class:`NoContent` when the challenge has nothing to build at all.
    """
    chal_dir = Path(chal_dir)
    for artifact in manifest.artifacts:
        _reject_escape(artifact, "artifact")
    _reject_escape(manifest.rehost_doc, "rehost_doc")

    ports = tuple(sorted((e.kind, e.port) for e in manifest.endpoints))
    ports = tuple(sorted(ports, key=lambda kp: (kp[1], kp[0])))

    upstream = chal_dir / "src" / "Dockerfile"
    if upstream.is_file():
        text = upstream.read_text(encoding="utf-8").replace("\r\n", "\n")
        if not text.endswith("\n"):
            text += "\n"
        return BuildPlan(
            challenge_id=manifest.id,
            base_ref=base_ref,
            stages=(),
            exposed_ports=ports,
            workspace_mount=WORKSPACE_MOUNT,
            context_dir=chal_dir,
            upstream_recipe=text,
        )

    steps: list[BuildStep] = []
    if manifest.artifacts:
        for artifact in manifest.artifacts:
            steps.append(CopyIn(src=artifact, dst=_artifact_dst(artifact)))
    elif (chal_dir / "dist").is_dir():
        steps.append(CopyIn(src="dist", dst=posixpath.join(CHALLENGE_ROOT, "dist")))
    if (chal_dir / "src").is_dir():
        steps.append(CopyIn(src="src", dst=posixpath.join(CHALLENGE_ROOT, "src")))

    tcp_ports = [p for k, p in ports if k == "tcp"]
    if tcp_ports:
        served = next((s.dst for s in steps if isinstance(s, CopyIn)), "/bin/cat")
        steps.append(
            Entrypoint(
                f"socat TCP-LISTEN:{tcp_ports[0]},reuseaddr,fork EXEC:{served}"
            )
        )

    if not steps and not ports:
        raise NoContent(
            f"challenge {manifest.id} has no sources, no artifacts, and no endpoints"
        )

    return BuildPlan(
        challenge_id=manifest.id,
        base_ref=base_ref,
        stages=tuple(steps),
        exposed_ports=ports,
        workspace_mount=WORKSPACE_MOUNT,
        context_dir=chal_dir,
    )


def render_build_recipe(plan: BuildPlan) -> str:
    """Render a plan to containerfile text. Pure; byte-stable per plan."""
    lines = [f"FROM {plan.base_ref} AS base"]
    if plan.upstream_recipe is not None:
        return "\n".join(lines) + "\n" + plan.upstream_recipe
    lines.append("FROM base AS challenge")
    for step in plan.stages:
        if isinstance(step, CopyIn):
            lines.append(f"COPY {step.src} {step.dst}")
        elif isinstance(step, Run):
            lines.append(f"RUN {step.command}")
        else:
            lines.append(f"ENTRYPOINT {step.command}")
    return "\n".join(lines) + "\n"


# --- runtime drivers --------------------------------------------------------


@dataclass(frozen=True)
class BoundEndpoint:
    kind: str
    host: str
    port: int


@dataclass(frozen=True)
class StartedRuntime:
    runtime_id: str
    endpoints: tuple[BoundEndpoint, ...]


class RuntimeDriver(ABC):
    """Build and run one challenge image; stateless across instances."""

    @abstractmethod
    def build(self, plan: BuildPlan) -> str:
        """Build the image; returns an image reference."""

    @abstractmethod
    def start(self, image_ref: str, plan: BuildPlan, workspace: Path) -> StartedRuntime:
        """Start a container; returns its id and host-bound endpoints."""

    @abstractmethod
    def stop(self, runtime_id: str) -> None:
        pass

    @abstractmethod
    def status(self, runtime_id: str) -> bool:
        """True while the runtime is alive."""


class _EchoListener:
    """Loopback TCP service standing in for a real challenge container."""

    def __init__(self, banner: bytes):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(("127.0.0.1", 0))
        self._sock.listen(8)
        self._banner = banner
        self._closed = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    def _serve(self) -> None:
        while not self._closed.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._session, args=(conn,), daemon=True).start()

    def _session(self, conn: socket.socket) -> None:
        try:
            conn.sendall(self._banner)
            while True:
                data = conn.recv(4096)
                if not data:
                    return
                conn.sendall(data)
        except OSError:
            pass
        finally:
            conn.close()

    def close(self) -> None:
        self._closed.set()
        try:
            self._sock.close()
        except OSError:
            pass


class LocalProcessDriver(RuntimeDriver):
    """In-process driver: no container engine, loopback listeners only.

    build() records the rendered recipe and returns a content-addressed
    ref; start() opens one ephemeral listener per declared endpoint that
    prints the challenge id and echoes input back.
    """

    def __init__(self) -> None:
        self.build_log: list[tuple[str, str]] = []  # (ref, recipe)
        self._running: dict[str, list[_EchoListener]] = {}
        self._lock = threading.Lock()

    def build(self, plan: BuildPlan) -> str:
        recipe = render_build_recipe(plan)
        digest = hashlib.sha256(recipe.encode("utf-8")).hexdigest()[:12]
        ref = f"local/{plan.challenge_id}:{digest}"
        self.build_log.append((ref, recipe))
        return ref

    def start(self, image_ref: str, plan: BuildPlan, workspace: Path) -> StartedRuntime:
        runtime_id = f"proc-{uuid.uuid4().hex[:12]}"
        banner = f"{plan.challenge_id}\n".encode("utf-8")
        listeners = []
        bound = []
        for kind, _port in plan.exposed_ports:
            listener = _EchoListener(banner)
            listeners.append(listener)
            bound.append(BoundEndpoint(kind=kind, host="127.0.0.1", port=listener.port))
        with self._lock:
            self._running[runtime_id] = listeners
        return StartedRuntime(runtime_id=runtime_id, endpoints=tuple(bound))

    def stop(self, runtime_id: str) -> None:
        with self._lock:
            listeners = self._running.pop(runtime_id, None)
        if listeners is None:
            raise DriverFailure(f"no such runtime {runtime_id!r}")
        for listener in listeners:
            listener.close()

    def status(self, runtime_id: str) -> bool:
        with self._lock:
            return runtime_id in self._running


CommandRunner = Callable[[Sequence[str]], subprocess.CompletedProcess]


def _default_runner(argv: Sequence[str]) -> subprocess.CompletedProcess:
    return subprocess.run(argv, capture_output=True, text=True)


class OciCommandDriver(RuntimeDriver):
    """Drives a container engine (docker/podman CLI-compatible) via argv.

    The runner is injectable so command construction is testable without
    an engine installed.
    """

    def __init__(self, engine: str = "docker", runner: CommandRunner | None = None):
        self.engine = engine
        self._run = runner or _default_runner

    def _check(self, argv: Sequence[str]) -> subprocess.CompletedProcess:
        proc = self._run(argv)
        if proc.returncode != 0:
            raise DriverFailure(
                f"{' '.join(argv[:3])}... exited {proc.returncode}: "
                f"{(proc.stderr or '').strip()}"
            )
        return proc

    def build(self, plan: BuildPlan) -> str:
        ref = f"ctf-vault/{plan.challenge_id}:latest"
        recipe_path = plan.context_dir / ".containerfile"
        recipe_path.write_text(render_build_recipe(plan), encoding="utf-8")
        try:
            self._check(
                [
                    self.engine,
                    "build",
                    "-t",
                    ref,
                    "-f",
                    str(recipe_path),
                    str(plan.context_dir),
                ]
            )
        finally:
            try:
                recipe_path.unlink()
            except OSError:
                pass
        return ref

    def start(self, image_ref: str, plan: BuildPlan, workspace: Path) -> StartedRuntime:
        argv = [self.engine, "run", "-d", "--rm"]
        argv += ["-v", f"{workspace}:{plan.workspace_mount}"]
        for _kind, port in plan.exposed_ports:
            argv += ["-p", f"127.0.0.1::{port}"]
        argv.append(image_ref)
        proc = self._check(argv)
        runtime_id = proc.stdout.strip()

        bound = []
        for kind, port in plan.exposed_ports:
            inspect = self._check(
                [
                    self.engine,
                    "inspect",
                    "--format",
                    f'{{{{(index (index .NetworkSettings.Ports "{port}/tcp") 0).HostPort}}}}',
                    runtime_id,
                ]
            )
            bound.append(
                BoundEndpoint(kind=kind, host="127.0.0.1", port=int(inspect.stdout.strip()))
            )
        return StartedRuntime(runtime_id=runtime_id, endpoints=tuple(bound))

    def stop(self, runtime_id: str) -> None:
        self._check([self.engine, "rm", "-f", runtime_id])

    def status(self, runtime_id: str) -> bool:
        proc = self._run([self.engine, "inspect", "--format", "{{.State.Running}}", runtime_id])
        return proc.returncode == 0 and proc.stdout.strip() == "true"


# --- instance lifecycle -----------------------------------------------------


class InstanceState(Enum):
    CREATED = "created"
    RUNNING = "running"
    STOPPED = "stopped"


@dataclass
class InstanceHandle:
    instance_id: str
    challenge_id: str
    state: InstanceState
    endpoints: tuple[BoundEndpoint, ...] = ()
    workspace: Path | None = None
    runtime_id: str | None = None


class InstanceManager:
    """Per-user instance lifecycle over a runtime driver.

    State machine per instance: Created -> Running -> Stopped, no other
    transitions. Quota counts a user's instances that are running or
    still being launched, so concurrent launches cannot overshoot.
    """

    def __init__(
        self,
        driver: RuntimeDriver,
        data_dir: Path,
        quota: int = 1,
        audit: InstanceAuditLog | None = None,
    ):
        self.driver = driver
        self.data_dir = Path(data_dir)
        self.quota = quota
        self.audit = audit
        self.instances: dict[str, InstanceHandle] = {}
        self.owners: dict[str, str] = {}  # instance_id -> user_id
        self.transitions: list[tuple[str, InstanceState | None, InstanceState]] = []
        self._active: dict[str, int] = {}  # user_id -> running + launching
        self._lock = threading.Lock()

    def _record(
        self,
        handle: InstanceHandle,
        old: InstanceState | None,
        new: InstanceState,
    ) -> None:
        handle.state = new
        self.transitions.append((handle.instance_id, old, new))
        if self.audit is not None:
            self.audit.record(
                handle.instance_id,
                handle.challenge_id,
                old.value if old is not None else "none",
                new.value,
            )

    def workspace_path(self, user_id: str, challenge_id: str) -> Path:
        return self.data_dir / "workspaces" / user_id / challenge_id

    def launch(
        self,
        user_id: str,
        manifest: ChallengeManifest,
        plan: BuildPlan,
    ) -> InstanceHandle:
        """Build and start one instance for a user.

        Raises :class:`QuotaExceeded` when the user is at their limit and
        :class:`DriverFailure` when the runtime cannot build or start; a
        failed launch never counts against the quota afterwards.
        """
        if not USER_ID_RE.fullmatch(user_id):
            raise SandboxError(f"invalid user id {user_id!r}")

        with self._lock:
            if self._active.get(user_id, 0) >= self.quota:
                raise QuotaExceeded(
                    f"user {user_id!r} already has {self.quota} active instance(s)"
                )
            self._active[user_id] = self._active.get(user_id, 0) + 1

        try:
            try:
                image_ref = self.driver.build(plan)
            except DriverFailure:
                raise
            except Exception as exc:
                raise DriverFailure(f"build failed for {manifest.id}: {exc}") from exc

            workspace = self.workspace_path(user_id, manifest.id)
            workspace.mkdir(parents=True, exist_ok=True)

            instance_id = f"inst-{uuid.uuid4().hex[:12]}"
            handle = InstanceHandle(
                instance_id=instance_id,
                challenge_id=manifest.id,
                state=InstanceState.CREATED,
                workspace=workspace,
            )
            self._record(handle, None, InstanceState.CREATED)

            try:
                started = self.driver.start(image_ref, plan, workspace)
            except DriverFailure:
                raise
            except Exception as exc:
                raise DriverFailure(f"start failed for {manifest.id}: {exc}") from exc

            handle.runtime_id = started.runtime_id
            handle.endpoints = started.endpoints if plan.exposed_ports else ()
            self._record(handle, InstanceState.CREATED, InstanceState.RUNNING)

            with self._lock:
                self.instances[instance_id] = handle
                self.owners[instance_id] = user_id
            return handle
        except Exception:
            with self._lock:
                self._active[user_id] -= 1
            raise

    def stop(self, instance_id: str) -> InstanceHandle:
        """Stop a running instance. Raises :class:`NotRunning` otherwise."""
        with self._lock:
            handle = self.instances.get(instance_id)
        if handle is None or handle.state is not InstanceState.RUNNING:
            raise NotRunning(f"instance {instance_id!r} is not running")

        if handle.runtime_id is not None:
            try:
                self.driver.stop(handle.runtime_id)
            except DriverFailure:
                raise
            except Exception as exc:
                raise DriverFailure(f"stop failed for {instance_id}: {exc}") from exc

        handle.endpoints = ()
        self._record(handle, InstanceState.RUNNING, InstanceState.STOPPED)
        with self._lock:
            self._active[self.owners[instance_id]] -= 1
        return handle

    def get(self, instance_id: str) -> InstanceHandle | None:
        with self._lock:
            return self.instances.get(instance_id)

    def owner_of(self, instance_id: str) -> str | None:
        with self._lock:
            return self.owners.get(instance_id)

    def instances_for(self, user_id: str) -> list[InstanceHandle]:
        with self._lock:
            return [
                h
                for iid, h in sorted(self.instances.items())
                if self.owners.get(iid) == user_id
            ]

    def stop_all(self) -> None:
        with self._lock:
            running = [
                h for h in self.instances.values() if h.state is InstanceState.RUNNING
            ]
        for handle in running:
            try:
                self.stop(handle.instance_id)
            except SandboxError:
                pass
