"""Flow session lifecycle state machine.

A session moves along these edges and no others:

    Initiated -> Authenticated -> ConsentPending -> Approved -> CodeIssued
                                                 -> Denied   -> Terminated
                                  CodeIssued -> TokenIssued

plus an abort edge to Terminated from any pre-approval phase (login
lockout, MFA exhaustion). TokenIssued and Terminated are terminal.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum

from creditconsent.protocol.types import ConsentDecision, InquiryRequest, UserIdentity
from creditconsent.protocol.pkce import PkceChallenge
from creditconsent.runtime import Clock


class Phase(str, Enum):
    INITIATED = "Initiated"
    AUTHENTICATED = "Authenticated"
    CONSENT_PENDING = "ConsentPending"
    APPROVED = "Approved"
    DENIED = "Denied"
    CODE_ISSUED = "CodeIssued"
    TOKEN_ISSUED = "TokenIssued"
    TERMINATED = "Terminated"


class FlowEvent(str, Enum):
    AUTHENTICATED = "authenticated"
    CONSENT_SHOWN = "consent_shown"
    APPROVED = "approved"
    DENIED = "denied"
    CODE_ISSUED = "code_issued"
    TOKEN_ISSUED = "token_issued"
    TERMINATED = "terminated"


_EDGES: dict[tuple[Phase, FlowEvent], Phase] = {
    (Phase.INITIATED, FlowEvent.AUTHENTICATED): Phase.AUTHENTICATED,
    (Phase.AUTHENTICATED, FlowEvent.CONSENT_SHOWN): Phase.CONSENT_PENDING,
    (Phase.CONSENT_PENDING, FlowEvent.APPROVED): Phase.APPROVED,
    (Phase.CONSENT_PENDING, FlowEvent.DENIED): Phase.DENIED,
    (Phase.APPROVED, FlowEvent.CODE_ISSUED): Phase.CODE_ISSUED,
    (Phase.CODE_ISSUED, FlowEvent.TOKEN_ISSUED): Phase.TOKEN_ISSUED,
    (Phase.DENIED, FlowEvent.TERMINATED): Phase.TERMINATED,
    # abort edges: failed authentication or MFA kills the flow
    (Phase.INITIATED, FlowEvent.TERMINATED): Phase.TERMINATED,
    (Phase.AUTHENTICATED, FlowEvent.TERMINATED): Phase.TERMINATED,
    (Phase.CONSENT_PENDING, FlowEvent.TERMINATED): Phase.TERMINATED,
}


class ProtocolViolation(Exception):
    """An operation was attempted from a phase that forbids it."""


@dataclass(frozen=True)
class StateToken:
    """Per-flow anti-forgery token echoed on the redirect (>= 96 bits)."""

    value: str

    def __post_init__(self) -> None:
        if len(self.value) < 24:  # 24 hex chars = 96 bits
            raise ValueError("state token shorter than 96 bits")


@dataclass
class FlowSession:
    session_id: str
    request: InquiryRequest
    challenge: PkceChallenge
    state: StateToken
    phase: Phase = Phase.INITIATED
    authenticated_user: UserIdentity | None = None
    consent: ConsentDecision | None = None
    created_at: float = 0.0  # monotonic, for TTL math
    created_wall: datetime | None = None  # wall clock, for display
    updated_at: float = 0.0


def transition(session: FlowSession, event: FlowEvent, clock: Clock) -> FlowSession:
    """Advance the session along a legal edge, refreshing updated_at.

    Illegal edges raise ProtocolViolation and leave the session untouched.
    """
    key = (session.phase, event)
    if key not in _EDGES:
        raise ProtocolViolation(
            f"event {event.value!r} not allowed in phase {session.phase.value!r}"
        )
    session.phase = _EDGES[key]
    session.updated_at = clock.monotonic()
    return session
