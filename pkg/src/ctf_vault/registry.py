"""Challenge archive ingestion, validation, indexing, and statistics.

Archive layout::

    <root>/<event>-<year>/<challenge-slug>/challenge.manifest
    <root>/<event>-<year>/<challenge-slug>/REHOST.md
    <root>/<event>-<year>/<challenge-slug>/dist/...   handout artifacts
    <root>/<event>-<year>/<challenge-slug>/src/...    build context

The manifest is a flat, line-oriented ``key: value`` document (UTF-8, LF
line endings). Keys come from a fixed set; ``artifact`` and ``endpoint``
repeat; ``#`` starts a comment line; the value is everything after the
first ``": "``, verbatim. A deliberately small format so parsing is
bit-exactly specifiable.
"""

from __future__ import annotations

import posixpath
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Union

from .flagcheck import normalize_flag

MANIFEST_FILENAME = "challenge.manifest"
DEFAULT_REHOST_DOC = "REHOST.md"

SLUG_RE = re.compile(r"^[a-z0-9][a-z0-9-]*$")
MAX_SLUG_LEN = 64
YEAR_RE = re.compile(r"^\d{4}$")
YEAR_MIN, YEAR_MAX = 2000, 2100
POINTS_RE = re.compile(r"^\d+$")
DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")

ENDPOINT_KINDS = ("tcp", "http", "ssh")
PORT_MIN, PORT_MAX = 1, 65535

KNOWN_KEYS = frozenset(
    {
        "id",
        "event",
        "year",
        "category",
        "points",
        "title",
        "description",
        "artifact",
        "endpoint",
        "flag",
        "flag_digest",
        "platform_flag",
        "rehost_doc",
    }
)
REPEATABLE_KEYS = frozenset({"artifact", "endpoint"})
REQUIRED_KEYS = ("id", "event", "year", "category", "points")


# --- errors -----------------------------------------------------------------


class ManifestError(ValueError):
    """Base for manifest document violations."""


class MalformedDocument(ManifestError):
    pass


class UnknownCategory(ManifestError):
    pass


class BadSlug(ManifestError):
    pass


class BadDigest(ManifestError):
    pass


class MissingField(ManifestError):
    pass


class UnknownKey(ManifestError):
    pass


class DuplicateId(Exception):
    """Two manifests in one archive declare the same id; ingest aborts."""

    def __init__(self, challenge_id: str, first: Path, second: Path):
        super().__init__(
            f"duplicate challenge id {challenge_id!r}: {first} and {second}"
        )
        self.challenge_id = challenge_id
        self.first = first
        self.second = second


# --- domain types -----------------------------------------------------------


class Category(Enum):
    """Closed challenge taxonomy; unknown strings are rejected at parse time."""

    CRYPTOGRAPHY = "cryptography"
    BINARY_EXPLOITATION = "binary-exploitation"
    REVERSE_ENGINEERING = "reverse-engineering"
    WEB_EXPLOITATION = "web-exploitation"
    FORENSICS = "forensics"
    OSINT = "osint"
    BLOCKCHAIN = "blockchain"
    RADIO_FREQUENCY = "radio-frequency"
    SOCIAL_ENGINEERING = "social-engineering"
    STEGANOGRAPHY = "steganography"
    MISC = "misc"

    @property
    def label(self) -> str:
        return _CATEGORY_LABELS[self]


# Display labels, in the fixed order stats tables use (Cryptography first,
# MISC last).
_CATEGORY_LABELS: dict[Category, str] = {
    Category.CRYPTOGRAPHY: "Cryptography",
    Category.BINARY_EXPLOITATION: "Binary Exploitation (PWN)",
    Category.REVERSE_ENGINEERING: "Reverse Engineering",
    Category.WEB_EXPLOITATION: "Web Exploitation",
    Category.FORENSICS: "Forensics",
    Category.OSINT: "OSINT",
    Category.BLOCKCHAIN: "Blockchain",
    Category.RADIO_FREQUENCY: "Radio Frequency",
    Category.SOCIAL_ENGINEERING: "Social Engineering",
    Category.STEGANOGRAPHY: "Steganography",
    Category.MISC: "MISC",
}

# Short names real archives use. Closed table so the enum stays closed;
# matching is case-insensitive.
CATEGORY_ALIASES: dict[str, Category] = {
    "crypto": Category.CRYPTOGRAPHY,
    "pwn": Category.BINARY_EXPLOITATION,
    "rev": Category.REVERSE_ENGINEERING,
    "web": Category.WEB_EXPLOITATION,
    "osint": Category.OSINT,
    "stego": Category.STEGANOGRAPHY,
    "rf": Category.RADIO_FREQUENCY,
}

_CANONICAL_CATEGORIES: dict[str, Category] = {c.value: c for c in Category}


def parse_category(text: str) -> Category:
    lowered = text.lower()
    if lowered in _CANONICAL_CATEGORIES:
        return _CANONICAL_CATEGORIES[lowered]
    if lowered in CATEGORY_ALIASES:
        return CATEGORY_ALIASES[lowered]
    raise UnknownCategory(f"unknown category {text!r}")


@dataclass(frozen=True)
class EndpointSpec:
    kind: str  # tcp | http | ssh
    port: int


@dataclass(frozen=True)
class PlaintextFlag:
    flag: str


@dataclass(frozen=True)
class HashedFlag:
    digest: str
    platform_flag: str


FlagSpec = Union[PlaintextFlag, HashedFlag]


@dataclass(frozen=True)
class ChallengeManifest:
    """One archived challenge's identity, provenance, artifacts, and flag.

    A plain record: invariants are enforced by :func:`parse_manifest`, not
    by construction, so downstream layers can be property-tested against
    adversarial values.
    """

    id: str
    event: str
    year: int
    category: Category
    points: int
    title: str = ""
    description: str = ""
    artifacts: tuple[str, ...] = ()
    endpoints: tuple[EndpointSpec, ...] = ()
    flag_spec: FlagSpec = PlaintextFlag("")
    rehost_doc: str = DEFAULT_REHOST_DOC


class Severity(Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    message: str
    path: str | None = None


@dataclass
class ValidationReport:
    challenge_id: str
    findings: list[Finding] = field(default_factory=list)

    @property
    def passing(self) -> bool:
        return not any(f.severity is Severity.ERROR for f in self.findings)

    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.ERROR]


# --- manifest parsing -------------------------------------------------------


def _check_relative_path(value: str, what: str, lineno: int | None = None) -> str:
    where = f"line {lineno}: " if lineno is not None else ""
    if not value:
        raise MalformedDocument(f"{where}{what} path is empty")
    if "\\" in value:
        raise MalformedDocument(f"{where}{what} path must use forward slashes: {value!r}")
    if value.startswith("/"):
        raise MalformedDocument(f"{where}{what} path must be relative: {value!r}")
    normalized = posixpath.normpath(value)
    if normalized == ".." or normalized.startswith("../"):
        raise MalformedDocument(f"{where}{what} path escapes the challenge directory: {value!r}")
    return value


def _parse_endpoint(value: str, lineno: int) -> EndpointSpec:
    kind, sep, port_text = value.partition("/")
    if not sep or kind not in ENDPOINT_KINDS or not POINTS_RE.match(port_text):
        raise MalformedDocument(
            f"line {lineno}: endpoint must be <kind>/<port> with kind in "
            f"{'/'.join(ENDPOINT_KINDS)}: {value!r}"
        )
    port = int(port_text)
    if not PORT_MIN <= port <= PORT_MAX:
        raise MalformedDocument(f"line {lineno}: endpoint port out of range: {port}")
    return EndpointSpec(kind=kind, port=port)


def parse_manifest(text: str) -> ChallengeManifest:
    """Parse one manifest document, rejecting anything outside the contract.

    Raises :class:`MalformedDocument`, :class:`UnknownKey`,
    :class:`UnknownCategory`, :class:`BadSlug`, :class:`BadDigest`, or
    :class:`MissingField`.
    """
    values: dict[str, str] = {}
    artifacts: list[str] = []
    endpoints: list[EndpointSpec] = []

    for lineno, line in enumerate(text.split("\n"), start=1):
        if line == "" or line.startswith("#"):
            continue
        key, sep, value = line.partition(": ")
        if not sep:
            raise MalformedDocument(f"line {lineno}: expected 'key: value', got {line!r}")
        if key not in KNOWN_KEYS:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}")
        if key == "artifact":
            artifacts.append(_check_relative_path(value, "artifact", lineno))
        elif key == "endpoint":
            endpoints.append(_parse_endpoint(value, lineno))
        else:
            if key in values:
                raise MalformedDocument(f"line {lineno}: duplicate key {key!r}")
            values[key] = value

    for key in REQUIRED_KEYS:
        if key not in values:
            raise MissingField(f"missing required key {key!r}")

    challenge_id = values["id"]
    if not SLUG_RE.match(challenge_id) or len(challenge_id) > MAX_SLUG_LEN:
        raise BadSlug(
            f"id must be a lowercase alnum/hyphen slug of length 1-{MAX_SLUG_LEN}: "
            f"{challenge_id!r}"
        )

    if not YEAR_RE.match(values["year"]):
        raise MalformedDocument(f"year must be a four-digit integer: {values['year']!r}")
    year = int(values["year"])
    if not YEAR_MIN <= year <= YEAR_MAX:
        raise MalformedDocument(f"year must be in [{YEAR_MIN}, {YEAR_MAX}]: {year}")

    if not POINTS_RE.match(values["points"]):
        raise MalformedDocument(f"points must be a non-negative integer: {values['points']!r}")
    points = int(values["points"])

    category = parse_category(values["category"])

    flag_spec = _resolve_flag_spec(values)

    rehost_doc = values.get("rehost_doc", DEFAULT_REHOST_DOC)
    _check_relative_path(rehost_doc, "rehost_doc")

    return ChallengeManifest(
        id=challenge_id,
        event=values["event"],
        year=year,
        category=category,
        points=points,
        title=values.get("title", ""),
        description=values.get("description", ""),
        artifacts=tuple(artifacts),
        endpoints=tuple(endpoints),
        flag_spec=flag_spec,
        rehost_doc=rehost_doc,
    )


def _resolve_flag_spec(values: Mapping[str, str]) -> FlagSpec:
    has_plain = "flag" in values
    has_digest = "flag_digest" in values
    has_platform = "platform_flag" in values

    if has_plain and (has_digest or has_platform):
        raise MalformedDocument(
            "exactly one flag specification allowed: remove either 'flag' or "
            "'flag_digest'/'platform_flag'"
        )
    if has_plain:
        if not normalize_flag(values["flag"]):
            raise MalformedDocument("flag must be non-empty after normalization")
        return PlaintextFlag(flag=values["flag"])
    if has_digest or has_platform:
        if not has_digest:
            raise MissingField("missing required key 'flag_digest'")
        if not has_platform:
            raise MissingField("missing required key 'platform_flag'")
        digest = values["flag_digest"]
        if not DIGEST_RE.match(digest):
            raise BadDigest(
                f"flag_digest must be exactly 64 lowercase hex characters: {digest!r}"
            )
        if not values["platform_flag"]:
            raise MalformedDocument("platform_flag must be non-empty")
        return HashedFlag(digest=digest, platform_flag=values["platform_flag"])
    raise MissingField("missing flag specification: provide 'flag' or 'flag_digest'")


def serialize_manifest(manifest: ChallengeManifest) -> str:
    """Canonical serialization; reparsing yields an equal manifest value.

    Optional fields at their defaults are omitted, keys are emitted in a
    fixed order, LF line endings throughout.
    """
    lines = [
        f"id: {manifest.id}",
        f"event: {manifest.event}",
        f"year: {manifest.year}",
        f"category: {manifest.category.value}",
        f"points: {manifest.points}",
    ]
    if manifest.title:
        lines.append(f"title: {manifest.title}")
    if manifest.description:
        lines.append(f"description: {manifest.description}")
    for artifact in manifest.artifacts:
        lines.append(f"artifact: {artifact}")
    for endpoint in manifest.endpoints:
        lines.append(f"endpoint: {endpoint.kind}/{endpoint.port}")
    if isinstance(manifest.flag_spec, PlaintextFlag):
        lines.append(f"flag: {manifest.flag_spec.flag}")
    else:
        lines.append(f"flag_digest: {manifest.flag_spec.digest}")
        lines.append(f"platform_flag: {manifest.flag_spec.platform_flag}")
    if manifest.rehost_doc != DEFAULT_REHOST_DOC:
        lines.append(f"rehost_doc: {manifest.rehost_doc}")
    return "\n".join(lines) + "\n"


# --- the registry -----------------------------------------------------------


@dataclass
class Registry:
    """Immutable-after-ingest index over an archive.

    Ids iterate lexicographically; the event index maps competition names
    (manifest ``event`` values, not directory names) to sorted id lists.
    """

    root: Path | None = None
    manifests: dict[str, ChallengeManifest] = field(default_factory=dict)
    by_event: dict[str, list[str]] = field(default_factory=dict)
    ingest_findings: list[Finding] = field(default_factory=list)
    dirs: dict[str, Path] = field(default_factory=dict)

    @classmethod
    def from_manifests(
        cls,
        manifests: Iterable[ChallengeManifest],
        root: Path | None = None,
        dirs: Mapping[str, Path] | None = None,
        findings: Iterable[Finding] = (),
    ) -> "Registry":
        ordered = sorted(manifests, key=lambda m: m.id)
        index: dict[str, ChallengeManifest] = {}
        by_event: dict[str, list[str]] = {}
        for m in ordered:
            if m.id in index:
                raise DuplicateId(m.id, Path("<memory>"), Path("<memory>"))
            index[m.id] = m
            by_event.setdefault(m.event, []).append(m.id)
        return cls(
            root=Path(root) if root is not None else None,
            manifests=index,
            by_event={event: sorted(ids) for event, ids in sorted(by_event.items())},
            ingest_findings=list(findings),
            dirs=dict(dirs or {}),
        )

    def get(self, challenge_id: str) -> ChallengeManifest | None:
        return self.manifests.get(challenge_id)

    def dir_for(self, challenge_id: str) -> Path | None:
        return self.dirs.get(challenge_id)

    def ids(self) -> list[str]:
        return list(self.manifests.keys())

    def __len__(self) -> int:
        return len(self.manifests)

    def __iter__(self) -> Iterator[ChallengeManifest]:
        return iter(self.manifests.values())

    def canonical_dump(self) -> str:
        """Deterministic text rendering of the whole registry, id order."""
        return "\n".join(serialize_manifest(m) for m in self)


def ingest_archive(root: Path) -> Registry:
    """Scan ``<root>/<event-dir>/<challenge-dir>/challenge.manifest`` into a registry.

    Challenge directories without a manifest are skipped with a
    ``NO_MANIFEST`` warning; manifests that fail to parse are skipped with
    a ``MANIFEST_INVALID`` error finding (partial archives must still
    ingest). A duplicate id aborts the whole ingest. The result does not
    depend on filesystem enumeration order.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"archive root {root} is not a readable directory")

    findings: list[Finding] = []
    manifests: list[ChallengeManifest] = []
    dirs: dict[str, Path] = {}
    seen: dict[str, Path] = {}

    for event_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for chal_dir in sorted(p for p in event_dir.iterdir() if p.is_dir()):
            rel = f"{event_dir.name}/{chal_dir.name}"
            manifest_path = chal_dir / MANIFEST_FILENAME
            if not manifest_path.is_file():
                findings.append(
                    Finding(
                        Severity.WARNING,
                        "NO_MANIFEST",
                        f"directory {rel} has no {MANIFEST_FILENAME}; skipped",
                        path=rel,
                    )
                )
                continue
            try:
                manifest = parse_manifest(manifest_path.read_text(encoding="utf-8"))
            except ManifestError as exc:
                findings.append(
                    Finding(
                        Severity.ERROR,
                        "MANIFEST_INVALID",
                        f"{rel}: {exc}",
                        path=rel,
                    )
                )
                continue
            if manifest.id in seen:
                raise DuplicateId(manifest.id, seen[manifest.id], manifest_path)
            seen[manifest.id] = manifest_path
            manifests.append(manifest)
            dirs[manifest.id] = chal_dir

    return Registry.from_manifests(manifests, root=root, dirs=dirs, findings=findings)


# --- validation -------------------------------------------------------------


def validate_challenge(manifest: ChallengeManifest, chal_dir: Path) -> ValidationReport:
    """Check one parsed challenge against its on-disk directory (read-only)."""
    chal_dir = Path(chal_dir)
    findings: list[Finding] = []

    if not (chal_dir / manifest.rehost_doc).is_file():
        findings.append(
            Finding(
                Severity.ERROR,
                "REHOST_MISSING",
                f"rehosting document {manifest.rehost_doc} not found",
                path=manifest.rehost_doc,
            )
        )
    for artifact in manifest.artifacts:
        if not (chal_dir / artifact).is_file():
            findings.append(
                Finding(
                    Severity.ERROR,
                    "ARTIFACT_MISSING",
                    f"artifact {artifact} listed in manifest but not on disk",
                    path=artifact,
                )
            )
    if not manifest.description:
        findings.append(
            Finding(Severity.WARNING, "EMPTY_DESCRIPTION", "description is empty")
        )
    if not manifest.endpoints and not manifest.artifacts:
        findings.append(
            Finding(
                Severity.ERROR,
                "NO_ENDPOINT_NO_ARTIFACT",
                "challenge declares neither endpoints nor artifacts; unreachable",
            )
        )
    return ValidationReport(challenge_id=manifest.id, findings=findings)


# --- queries and statistics -------------------------------------------------


def query(
    registry: Registry,
    event: str | None = None,
    year: int | None = None,
    category: Category | None = None,
) -> list[ChallengeManifest]:
    """Manifests matching all provided filters, sorted by (event, year, id)."""
    results = [
        m
        for m in registry
        if (event is None or m.event == event)
        and (year is None or m.year == year)
        and (category is None or m.category is category)
    ]
    results.sort(key=lambda m: (m.event, m.year, m.id))
    return results


UNKNOWN_BUCKET = "unknown"
TOTAL_LABEL = "Total"


@dataclass(frozen=True)
class CategoryStat:
    category: str  # display label, "unknown", or "Total"
    available: int
    solves: int


def category_stats(registry: Registry, solves: Iterable) -> list[CategoryStat]:
    """Per-category availability and deduplicated solve counts.

    Solves are counted once per (user, challenge) pair. All eleven
    categories are always present (zero-filled), in the fixed table order;
    records whose challenge id does not resolve are flagged under a
    synthetic ``unknown`` row; a ``Total`` row closes the table.
    """
    available: Counter = Counter(m.category for m in registry)
    pairs = {(r.user_id, r.challenge_id) for r in solves}

    solved: Counter = Counter()
    unknown = 0
    for _user, challenge_id in pairs:
        manifest = registry.get(challenge_id)
        if manifest is None:
            unknown += 1
        else:
            solved[manifest.category] += 1

    rows = [
        CategoryStat(cat.label, available[cat], solved[cat]) for cat in Category
    ]
    if unknown:
        rows.append(CategoryStat(UNKNOWN_BUCKET, 0, unknown))
    rows.append(
        CategoryStat(
            TOTAL_LABEL,
            sum(r.available for r in rows),
            sum(r.solves for r in rows),
        )
    )
    return rows
