"""Hash-based flag verification.

A check record carries only the SHA-256 digest of the true flag plus a
platform flag to release on success, so archived challenges can verify
submissions without the true flag ever being stored in the clear.
"""

from __future__ import annotations

import hashlib
import hmac
import re
from dataclasses import dataclass

ALGORITHM = "sha256"

_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")


class FlagCheckError(Exception):
    pass


class EmptyFlag(FlagCheckError):
    """Flag (or platform flag) is empty after normalization."""


class MalformedRecord(FlagCheckError):
    """Serialized check record does not match the four-line format."""


@dataclass(frozen=True)
class CheckRecord:
    """Portable verification artifact for one challenge's flag."""

    algorithm: str
    digest: str
    platform_flag: str
    challenge_id: str

    def __post_init__(self) -> None:
        if self.algorithm != ALGORITHM:
            raise MalformedRecord(f"unsupported algorithm {self.algorithm!r}")
        if not _DIGEST_RE.fullmatch(self.digest):
            raise MalformedRecord("digest must be 64 lowercase hex characters")
        if not self.challenge_id:
            raise MalformedRecord("challenge id must be non-empty")


@dataclass(frozen=True)
class Verdict:
    """Outcome of a verification: accepted submissions carry the platform flag."""

    accepted: bool
    platform_flag: str | None = None


REJECT = Verdict(accepted=False)


def normalize_flag(raw: str) -> str:
    """Strip trailing newline/carriage-return characters, nothing else.

    Flags stay case- and whitespace-sensitive; only line endings picked up
    from terminal input are removed.
    """
    return raw.rstrip("\r\n")


def digest_flag(normalized: str) -> str:
    """Lowercase hex SHA-256 of the flag's UTF-8 bytes."""
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


def generate_check(actual_flag: str, platform_flag: str, challenge_id: str) -> CheckRecord:
    """Build a check record for a challenge; the actual flag is not retained."""
    normalized = normalize_flag(actual_flag)
    if not normalized:
        raise EmptyFlag("actual flag is empty after normalization")
    if not platform_flag:
        raise EmptyFlag("platform flag must be non-empty")
    return CheckRecord(
        algorithm=ALGORITHM,
        digest=digest_flag(normalized),
        platform_flag=platform_flag,
        challenge_id=challenge_id,
    )


def verify(record: CheckRecord, submission: str) -> Verdict:
    """Check a submission against a record's digest.

    The two digests are fixed-length, and the comparison is
    length-independent (no short-circuit on the first differing byte).
    """
    got = digest_flag(normalize_flag(submission))
    if hmac.compare_digest(got.encode("ascii"), record.digest.encode("ascii")):
        return Verdict(accepted=True, platform_flag=record.platform_flag)
    return REJECT


def verify_plaintext(expected: str, submission: str) -> Verdict:
    """Verify against a known plaintext flag.

    Internally routed through the digest path so hashed and plaintext
    challenges share one verification route; the released flag is the
    expected flag itself.
    """
    normalized = normalize_flag(expected)
    record = generate_check(expected, normalized, challenge_id="plaintext")
    return verify(record, submission)


def serialize_record(record: CheckRecord) -> str:
    """Four LF-terminated lines; the wire format for generated records."""
    return (
        f"algorithm: {record.algorithm}\n"
        f"challenge: {record.challenge_id}\n"
        f"digest: {record.digest}\n"
        f"platform_flag: {record.platform_flag}\n"
    )


def parse_record(text: str) -> CheckRecord:
    lines = text.split("\n")
    if len(lines) != 5 or lines[4] != "":
        raise MalformedRecord("expected exactly four LF-terminated lines")
    fields = {}
    for key, line in zip(("algorithm", "challenge", "digest", "platform_flag"), lines):
        prefix = f"{key}: "
        if not line.startswith(prefix):
            raise MalformedRecord(f"expected line starting with {prefix!r}")
        fields[key] = line[len(prefix):]
    return CheckRecord(
        algorithm=fields["algorithm"],
        digest=fields["digest"],
        platform_flag=fields["platform_flag"],
        challenge_id=fields["challenge"],
    )
