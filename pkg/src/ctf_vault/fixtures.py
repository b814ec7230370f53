"""Builders for synthetic archives and solve histories.

Deterministic by construction: the same arguments always yield the same
manifests, directory trees, and solve records. Used by the test suite
and the demo tooling; nothing here touches live platform state.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from .flagcheck import generate_check
from .registry import (
    Category,
    ChallengeManifest,
    EndpointSpec,
    HashedFlag,
    PlaintextFlag,
    Registry,
    serialize_manifest,
)
from .store import SolveRecord


def make_manifest(
    challenge_id: str,
    category: Category = Category.MISC,
    event: str = "fixture-ctf",
    year: int = 2024,
    points: int = 100,
    flag: str = "flag{fixture}",
    artifacts: tuple[str, ...] = (),
    endpoints: tuple[EndpointSpec, ...] = (),
    description: str = "fixture challenge",
    hashed: bool = False,
) -> ChallengeManifest:
    if hashed:
        record = generate_check(flag, platform_flag=f"vault{{{challenge_id}}}",
                                challenge_id=challenge_id)
        spec = HashedFlag(digest=record.digest, platform_flag=record.platform_flag)
    else:
        spec = PlaintextFlag(flag=flag)
    return ChallengeManifest(
        id=challenge_id,
        event=event,
        year=year,
        category=category,
        points=points,
        title=challenge_id.replace("-", " "),
        description=description,
        artifacts=artifacts,
        endpoints=endpoints,
        flag_spec=spec,
    )


def registry_from_counts(counts: Mapping[Category, int]) -> Registry:
    """In-memory registry holding ``counts[cat]`` challenges per category."""
    manifests = []
    for category in Category:
        for i in range(counts.get(category, 0)):
            manifests.append(
                make_manifest(
                    f"{category.value}-{i:04d}",
                    category=category,
                    artifacts=("dist/handout.txt",),
                )
            )
    return Registry.from_manifests(manifests)


def solves_for_counts(
    registry: Registry, counts: Mapping[Category, int]
) -> list[SolveRecord]:
    """``counts[cat]`` deduplicated solves per category, distinct users.

    Users are assigned round-robin per challenge so any count up to
    challenges * users is reachable without (user, challenge) repeats.
    """
    by_category: dict[Category, list[str]] = {c: [] for c in Category}
    for manifest in registry:
        by_category[manifest.category].append(manifest.id)

    records = []
    ts = 1_700_000_000
    for category in Category:
        wanted = counts.get(category, 0)
        ids = by_category[category]
        if wanted and not ids:
            raise ValueError(f"no challenges available in {category.value}")
        for i in range(wanted):
            user = f"user-{i // len(ids):04d}"
            challenge = ids[i % len(ids)]
            records.append(SolveRecord(user_id=user, challenge_id=challenge, timestamp=ts))
            ts += 1
    return records


def write_challenge_dir(
    root: Path,
    manifest: ChallengeManifest,
    artifact_content: bytes = b"fixture artifact\n",
    rehost_text: str = "# Rehosting\n\nRuns as shipped.\n",
    src_files: Mapping[str, str] | None = None,
) -> Path:
    """Materialize one challenge directory under ``<root>/<event>-<year>/``."""
    chal_dir = Path(root) / f"{manifest.event}-{manifest.year}" / manifest.id
    chal_dir.mkdir(parents=True, exist_ok=True)
    (chal_dir / "challenge.manifest").write_text(
        serialize_manifest(manifest), encoding="utf-8"
    )
    (chal_dir / manifest.rehost_doc).write_text(rehost_text, encoding="utf-8")
    for artifact in manifest.artifacts:
        path = chal_dir / artifact
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(artifact_content)
    for rel, text in (src_files or {}).items():
        path = chal_dir / "src" / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return chal_dir


def write_fixture_archive(root: Path, manifests: Iterable[ChallengeManifest]) -> Path:
    root = Path(root)
    for manifest in manifests:
        write_challenge_dir(root, manifest)
    return root
