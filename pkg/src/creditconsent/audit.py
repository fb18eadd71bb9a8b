"""Append-only, hash-chained audit log for all authorization events.

Chain rule, bit-exact so independent implementations agree:

    canonical(event) = UTF-8 bytes of the fields
        prev_hash, seq, timestamp, event_kind, decision, client_ip,
        subject, detail
    joined by the single byte 0x1F (decision empty string when absent,
    seq in decimal), and

    hash = hex(SHA-256(canonical(event)))

The genesis event's prev_hash is 64 zero hex chars. Events are written to
the log file and fsynced before append returns: if the write fails, the
operation that triggered the event must fail too.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from enum import Enum
from hashlib import sha256
from pathlib import Path
from typing import IO, Iterable

from creditconsent.protocol.types import Decision
from creditconsent.runtime import Clock, rfc3339

GENESIS_HASH = "0" * 64
_SEP = "\x1f"

_FIELD_ORDER = (
    "seq",
    "timestamp",
    "event_kind",
    "decision",
    "client_ip",
    "subject",
    "detail",
    "prev_hash",
    "hash",
)


class EventKind(str, Enum):
    AUTHORIZE_INIT = "AuthorizeInit"
    LOGIN_SUCCESS = "LoginSuccess"
    LOGIN_FAILURE = "LoginFailure"
    MFA_RESULT = "MfaResult"
    CONSENT_DECISION = "ConsentDecision"
    CODE_ISSUED = "CodeIssued"
    TOKEN_ISSUED = "TokenIssued"
    TOKEN_REJECTED = "TokenRejected"
    ARTIFACT_ISSUED = "ArtifactIssued"
    ARTIFACT_REDEEMED = "ArtifactRedeemed"
    REPORT_ACCESSED = "ReportAccessed"
    RATE_LIMITED = "RateLimited"
    CSRF_REJECTED = "CsrfRejected"
    TERMINATED = "Terminated"


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: str  # RFC 3339 UTC
    event_kind: str
    decision: str | None
    client_ip: str
    subject: str
    detail: str
    prev_hash: str
    hash: str

    def to_json_line(self) -> str:
        return json.dumps(
            {k: getattr(self, k) for k in _FIELD_ORDER}, ensure_ascii=False
        )


def _canonical(
    prev_hash: str,
    seq: int,
    timestamp: str,
    event_kind: str,
    decision: str | None,
    client_ip: str,
    subject: str,
    detail: str,
) -> bytes:
    parts = (
        prev_hash,
        str(seq),
        timestamp,
        event_kind,
        decision or "",
        client_ip,
        subject,
        detail,
    )
    return _SEP.join(parts).encode("utf-8")


def _chain_hash(*fields) -> str:
    return sha256(_canonical(*fields)).hexdigest()


class AuditWriteError(Exception):
    """Raised when the log cannot be made durable; callers must fail closed."""


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    first_bad_seq: int | None = None


class AuditLog:
    """Serialized appender plus in-memory view of the chain.

    With a path, every event is written through and fsynced before append
    returns. Without one the log is memory-only (unit tests, embedded use).
    """

    def __init__(self, clock: Clock, path: str | Path | None = None):
        self._clock = clock
        self._events: list[AuditEvent] = []
        self._lock = threading.Lock()
        self._path = Path(path) if path is not None else None
        self._fh: IO[str] | None = None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self._path, "a", encoding="utf-8")

    @property
    def path(self) -> Path | None:
        return self._path

    def append(
        self,
        kind: EventKind,
        *,
        decision: Decision | None = None,
        client_ip: str = "",
        subject: str = "",
        detail: str = "",
    ) -> AuditEvent:
        with self._lock:
            seq = len(self._events)
            prev_hash = self._events[-1].hash if self._events else GENESIS_HASH
            timestamp = rfc3339(self._clock.now())
            decision_str = decision.value if decision is not None else None
            event = AuditEvent(
                seq=seq,
                timestamp=timestamp,
                event_kind=kind.value,
                decision=decision_str,
                client_ip=client_ip,
                subject=subject,
                detail=detail,
                prev_hash=prev_hash,
                hash=_chain_hash(
                    prev_hash, seq, timestamp, kind.value, decision_str,
                    client_ip, subject, detail,
                ),
            )
            self._write_through(event)
            self._events.append(event)
            return event

    def _write_through(self, event: AuditEvent) -> None:
        if self._fh is None:
            return
        try:
            self._fh.write(event.to_json_line() + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except (OSError, ValueError) as exc:
            raise AuditWriteError(str(exc)) from exc

    def events(self) -> list[AuditEvent]:
        with self._lock:
            return list(self._events)

    def query(
        self,
        kind: EventKind | None = None,
        decision: Decision | None = None,
        since: str | None = None,
        until: str | None = None,
    ) -> list[AuditEvent]:
        """Order-preserving filtered view. Timestamps compare lexically,
        which is correct for RFC 3339 UTC."""
        out = []
        for e in self.events():
            if kind is not None and e.event_kind != kind.value:
                continue
            if decision is not None and e.decision != decision.value:
                continue
            if since is not None and e.timestamp < since:
                continue
            if until is not None and e.timestamp > until:
                continue
            out.append(e)
        return out

    def verify(self) -> VerifyResult:
        return verify_chain(self.events())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def verify_chain(events: Iterable[AuditEvent]) -> VerifyResult:
    """Recompute every hash; ok iff all match, seq is contiguous from 0,
    and each prev_hash links to the previous event's hash."""
    prev_hash = GENESIS_HASH
    for i, e in enumerate(events):
        if e.seq != i or e.prev_hash != prev_hash:
            return VerifyResult(ok=False, first_bad_seq=i)
        expected = _chain_hash(
            e.prev_hash, e.seq, e.timestamp, e.event_kind, e.decision,
            e.client_ip, e.subject, e.detail,
        )
        if e.hash != expected:
            return VerifyResult(ok=False, first_bad_seq=i)
        prev_hash = e.hash
    return VerifyResult(ok=True)


def load_events(path: str | Path) -> list[AuditEvent]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        events.append(AuditEvent(**{k: raw.get(k) for k in _FIELD_ORDER}))
    return events


def verify_file(path: str | Path) -> VerifyResult:
    return verify_chain(load_events(path))
