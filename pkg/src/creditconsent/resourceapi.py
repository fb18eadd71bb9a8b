"""Credit bureau API layer: protected report retrieval behind bearer-token
validation and per-client token-bucket rate limiting.

    GET /api/credit-report
        Authorization: Bearer <token>
        X-Client-Id: <caller>

Checks run in order: rate limit, then token validity, then scope. A 429
never consumes token validity; a retry after refill succeeds.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

from fastapi import APIRouter, Header, Request
from fastapi.responses import JSONResponse

from creditconsent.audit import AuditLog, EventKind
from creditconsent.authserver import SessionStore
from creditconsent.protocol import Issuer, Scope
from creditconsent.runtime import Clock
from creditconsent.transcript import Transcript


@dataclass(frozen=True)
class CreditReport:
    name: str
    ssn_masked: str
    credit_score: int
    inquiries: int
    delinquencies: int

    def __post_init__(self) -> None:
        if not (self.ssn_masked.startswith("***-**-") and len(self.ssn_masked) == 11):
            raise ValueError("ssn_masked must look like ***-**-DDDD")
        if not 300 <= self.credit_score <= 850:
            raise ValueError(f"credit_score {self.credit_score} outside [300,850]")
        if self.inquiries < 0 or self.delinquencies < 0:
            raise ValueError("counters must be non-negative")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ssn_masked": self.ssn_masked,
            "credit_score": self.credit_score,
            "inquiries": self.inquiries,
            "delinquencies": self.delinquencies,
        }


@dataclass
class _Bucket:
    capacity: float
    refill_per_s: float
    tokens: float
    last_refill: float


@dataclass(frozen=True)
class RateDecision:
    allowed: bool
    retry_after_s: int = 0


class RateLimiter:
    """Classic token bucket, one bucket per client. Refill is
    time-proportional and capped at capacity; allow consumes one token."""

    def __init__(self, clock: Clock, capacity: int, refill_per_min: float):
        self._clock = clock
        self._capacity = float(capacity)
        self._refill_per_s = refill_per_min / 60.0
        self._buckets: dict[str, _Bucket] = {}
        self._lock = threading.Lock()

    def check(self, client_id: str) -> RateDecision:
        now = self._clock.monotonic()
        with self._lock:
            bucket = self._buckets.get(client_id)
            if bucket is None:
                bucket = _Bucket(
                    capacity=self._capacity,
                    refill_per_s=self._refill_per_s,
                    tokens=self._capacity,
                    last_refill=now,
                )
                self._buckets[client_id] = bucket
            bucket.tokens = min(
                bucket.capacity,
                bucket.tokens + (now - bucket.last_refill) * bucket.refill_per_s,
            )
            bucket.last_refill = now
            if bucket.tokens >= 1.0:
                bucket.tokens -= 1.0
                return RateDecision(allowed=True)
            deficit = 1.0 - bucket.tokens
            return RateDecision(
                allowed=False,
                retry_after_s=max(1, math.ceil(deficit / bucket.refill_per_s)),
            )


@dataclass
class _SubjectRecord:
    name: str
    ssn_last4: str
    credit_score: int
    delinquencies: int
    inquiries: int = 0


class SubjectStore:
    """Demo subject fixtures keyed by the inquiry's subject hint. The
    returned inquiry count includes the retrieval being served."""

    def __init__(self) -> None:
        self._subjects: dict[str, _SubjectRecord] = {}
        self._lock = threading.Lock()

    def add(self, name: str, ssn_last4: str, credit_score: int, delinquencies: int = 0) -> None:
        with self._lock:
            self._subjects[name] = _SubjectRecord(
                name=name,
                ssn_last4=ssn_last4,
                credit_score=credit_score,
                delinquencies=delinquencies,
            )

    def pull_report(self, subject_hint: str) -> CreditReport | None:
        with self._lock:
            record = self._subjects.get(subject_hint)
            if record is None:
                return None
            record.inquiries += 1
            return CreditReport(
                name=record.name,
                ssn_masked=f"***-**-{record.ssn_last4}",
                credit_score=record.credit_score,
                inquiries=record.inquiries,
                delinquencies=record.delinquencies,
            )


def seed_demo_subjects(subjects: SubjectStore) -> None:
    subjects.add("John Doe", ssn_last4="1234", credit_score=732, delinquencies=0)


class ResourceError(Exception):
    def __init__(self, status: int, body: dict, retry_after_s: int | None = None):
        super().__init__(body.get("error", "error"))
        self.status = status
        self.body = body
        self.retry_after_s = retry_after_s


class ResourceService:
    def __init__(
        self,
        clock: Clock,
        issuer: Issuer,
        sessions: SessionStore,
        subjects: SubjectStore,
        limiter: RateLimiter,
        audit: AuditLog,
        transcript: Transcript,
    ):
        self.clock = clock
        self.issuer = issuer
        self.sessions = sessions
        self.subjects = subjects
        self.limiter = limiter
        self.audit = audit
        self.transcript = transcript

    def get_credit_report(
        self, bearer_token: str, client_id: str, client_ip: str
    ) -> CreditReport:
        decision = self.limiter.check(client_id)
        if not decision.allowed:
            self.audit.append(
                EventKind.RATE_LIMITED,
                client_ip=client_ip,
                subject=client_id,
                detail=f"retry_after={decision.retry_after_s}s",
            )
            raise ResourceError(
                429,
                {"error": "rate_limited"},
                retry_after_s=decision.retry_after_s,
            )
        result = self.issuer.validate_token(bearer_token, Scope.CREDIT_SCORE)
        if not result.valid:
            self.audit.append(
                EventKind.TOKEN_REJECTED,
                client_ip=client_ip,
                subject=client_id,
                detail=f"resource_api reason={result.reason}",
            )
            if result.reason == "insufficient_scope":
                raise ResourceError(403, {"error": "insufficient_scope"})
            raise ResourceError(
                401, {"error": "invalid_token", "reason": result.reason}
            )
        session = self.sessions.get(result.session_id)
        if session is None:
            raise ResourceError(401, {"error": "invalid_token", "reason": "unknown"})
        report = self.subjects.pull_report(session.request.subject_hint)
        if report is None:
            raise ResourceError(404, {"error": "unknown_subject"})
        self.audit.append(
            EventKind.REPORT_ACCESSED,
            client_ip=client_ip,
            subject=session.session_id,
            detail=f"subject={report.name} inquiries={report.inquiries}",
        )
        self.transcript.log("█ Credit Report:")
        self.transcript.raw(f"Name: {report.name}")
        self.transcript.raw(f"SSN: {report.ssn_masked}")
        self.transcript.raw(f"Credit Score: {report.credit_score}")
        self.transcript.raw(f"Inquiries: {report.inquiries}")
        self.transcript.raw(f"Delinquencies: {report.delinquencies}")
        return report


def build_resource_router(service: ResourceService) -> APIRouter:
    router = APIRouter()

    @router.get("/api/credit-report")
    def credit_report(
        request: Request,
        authorization: str = Header(""),
        x_client_id: str = Header(""),
    ):
        if not authorization.startswith("Bearer "):
            return JSONResponse(
                {"error": "invalid_token", "reason": "unknown"}, status_code=401
            )
        if not x_client_id:
            return JSONResponse(
                {"error": "invalid_request", "detail": "X-Client-Id header required"},
                status_code=400,
            )
        token = authorization.removeprefix("Bearer ")
        client_ip = request.client.host if request.client else ""
        try:
            report = service.get_credit_report(token, x_client_id, client_ip)
        except ResourceError as exc:
            headers = (
                {"Retry-After": str(exc.retry_after_s)}
                if exc.retry_after_s is not None
                else None
            )
            return JSONResponse(exc.body, status_code=exc.status, headers=headers)
        return JSONResponse(report.to_dict())

    return router
