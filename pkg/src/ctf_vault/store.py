"""Durable append-only persistence for solve records and instance audit events.

The solve log is a newline-delimited plain-text file (one record per line,
``<unix_ts> <user_id> <challenge_id>``) plus an in-memory index of unique
(user, challenge) pairs. Volumes are desk-scale, so an auditable flat file
beats a database here.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Iterator


class CorruptLog(Exception):
    """An interior log line does not match the record format."""

    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno


class AppendOutcome(Enum):
    APPENDED = "appended"
    DUPLICATE = "duplicate"


@dataclass(frozen=True)
class SolveRecord:
    user_id: str
    challenge_id: str
    timestamp: int

    def validate(self) -> None:
        if not self.user_id or _has_whitespace(self.user_id):
            raise ValueError("user_id must be non-empty and contain no whitespace")
        if not self.challenge_id or _has_whitespace(self.challenge_id):
            raise ValueError("challenge_id must be non-empty and contain no whitespace")
        if not isinstance(self.timestamp, int) or self.timestamp < 0:
            raise ValueError("timestamp must be a non-negative integer")


def _has_whitespace(s: str) -> bool:
    return any(ch.isspace() for ch in s)


def _parse_line(line: str, lineno: int) -> SolveRecord:
    parts = line.split(" ")
    if len(parts) != 3:
        raise CorruptLog(lineno, f"expected 3 space-separated fields, got {len(parts)}")
    ts_text, user_id, challenge_id = parts
    if not ts_text.isdigit():
        raise CorruptLog(lineno, f"bad timestamp {ts_text!r}")
    if not user_id or not challenge_id:
        raise CorruptLog(lineno, "empty field")
    return SolveRecord(user_id=user_id, challenge_id=challenge_id, timestamp=int(ts_text))


class SolveLog:
    """Solve records in append order, with a derived unique-pair index.

    Single-writer: appends are serialized through one instance. Pass
    ``path=None`` for a memory-only log (fixtures, dry runs).
    """

    def __init__(self, path: Path | None = None):
        self._path = Path(path) if path is not None else None
        self._records: list[SolveRecord] = []
        self._pairs: set[tuple[str, str]] = set()
        self._warnings: list[str] = []
        self._fh: IO[bytes] | None = None
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: Path) -> "SolveLog":
        """Parse an existing log file; an absent file yields an empty log.

        A final line without its trailing newline is treated as a torn
        write and dropped with a warning; malformed complete lines abort.
        """
        log = cls(path)
        path = Path(path)
        if not path.exists():
            return log
        data = path.read_bytes()
        if not data:
            return log
        complete, sep, tail = data.rpartition(b"\n")
        if tail:
            log._warnings.append(
                f"dropped torn trailing line: {tail.decode('utf-8', errors='replace')!r}"
            )
            # crash repair: cut the torn bytes off so the next append
            # starts on a fresh line instead of gluing onto the fragment
            with open(path, "r+b") as fh:
                fh.truncate(len(data) - len(tail))
        if complete:
            for lineno, raw in enumerate(complete.split(b"\n"), start=1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise CorruptLog(lineno, f"invalid UTF-8: {exc}") from exc
                record = _parse_line(line, lineno)
                log._records.append(record)
                log._pairs.add((record.user_id, record.challenge_id))
        return log

    def append(self, record: SolveRecord) -> AppendOutcome:
        """Append one record, flushed durably to disk before returning.

        A (user, challenge) pair already present is rejected as a duplicate
        and the on-disk log is left untouched.
        """
        record.validate()
        with self._lock:
            key = (record.user_id, record.challenge_id)
            if key in self._pairs:
                return AppendOutcome.DUPLICATE
            line = f"{record.timestamp} {record.user_id} {record.challenge_id}\n"
            if self._path is not None:
                fh = self._open()
                fh.write(line.encode("utf-8"))
                fh.flush()
                os.fsync(fh.fileno())
            # memory updated only after the write lands, so an IO failure
            # leaves the log logically unchanged
            self._records.append(record)
            self._pairs.add(key)
            return AppendOutcome.APPENDED

    def has_solved(self, user_id: str, challenge_id: str) -> bool:
        return (user_id, challenge_id) in self._pairs

    def records(self) -> tuple[SolveRecord, ...]:
        return tuple(self._records)

    def records_for_user(self, user_id: str) -> list[SolveRecord]:
        return [r for r in self._records if r.user_id == user_id]

    @property
    def warnings(self) -> tuple[str, ...]:
        return tuple(self._warnings)

    @property
    def path(self) -> Path | None:
        return self._path

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[SolveRecord]:
        return iter(self._records)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _open(self) -> IO[bytes]:
        if self._fh is None:
            assert self._path is not None
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self._path, "ab")
        return self._fh


def load_solves(path: Path) -> SolveLog:
    return SolveLog.load(path)


def append_solve(log: SolveLog, record: SolveRecord) -> AppendOutcome:
    return log.append(record)


def has_solved(log: SolveLog, user_id: str, challenge_id: str) -> bool:
    return log.has_solved(user_id, challenge_id)


class InstanceAuditLog:
    """Append-only trail of instance lifecycle events (best effort, no fsync)."""

    def __init__(self, path: Path):
        self._path = Path(path)
        self._fh: IO[str] | None = None
        self._lock = threading.Lock()

    def record(self, instance_id: str, challenge_id: str, old_state: str | None, new_state: str) -> None:
        old = old_state if old_state is not None else "-"
        line = f"{int(time.time())} {instance_id} {challenge_id} {old}>{new_state}\n"
        with self._lock:
            if self._fh is None:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = open(self._path, "a", encoding="utf-8")
            self._fh.write(line)
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
