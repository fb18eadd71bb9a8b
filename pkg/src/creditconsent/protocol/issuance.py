"""Issuance and redemption of authorization codes, access tokens, and
offline artifact codes.

Single-use semantics are enforced under one lock: of N concurrent
redemptions of the same code or artifact, exactly one wins. Secrets are
indexed by their SHA-256 digest so lookups never compare raw secret
material against stored values.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Protocol

from creditconsent.protocol.pkce import PkceChallenge, PkceVerifier, verify_challenge
from creditconsent.protocol.session import (
    FlowEvent,
    FlowSession,
    Phase,
    ProtocolViolation,
    transition,
)
from creditconsent.protocol.types import Channel, Scope
from creditconsent.runtime import Clock, Entropy


class InvalidGrant(Exception):
    """Any failed code redemption. The wire error is always invalid_grant;
    `reason` feeds the audit trail."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class ArtifactError(Exception):
    """Failed artifact redemption: not_found, link_expired, or link_used."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class AuthorizationCode:
    code: str
    session_id: str
    bound_challenge: PkceChallenge
    bound_client_id: str
    bound_redirect_uri: str
    issued_at: float
    ttl_seconds: int
    redeemed: bool = False

    def expired(self, now: float) -> bool:
        return now - self.issued_at > self.ttl_seconds


@dataclass
class AccessToken:
    token: str
    session_id: str
    scope: frozenset[Scope]
    issued_at: float
    ttl_seconds: int
    revoked: bool = False

    def expired(self, now: float) -> bool:
        return now - self.issued_at > self.ttl_seconds


@dataclass
class ArtifactCode:
    artifact: str
    request_uri: str
    session_id: str
    issued_at: float
    ttl_seconds: int
    redeemed: bool = False

    def expired(self, now: float) -> bool:
        return now - self.issued_at > self.ttl_seconds


@dataclass(frozen=True)
class TokenValidation:
    """Outcome of validate_token; Invalid is a value, never an exception."""

    valid: bool
    session_id: str | None = None
    scope: frozenset[Scope] | None = None
    reason: str | None = None  # unknown | expired | revoked | insufficient_scope


class SessionLookup(Protocol):
    def get(self, session_id: str) -> FlowSession | None: ...


def _digest(secret: str) -> str:
    return hashlib.sha256(secret.encode("utf-8")).hexdigest()


class Issuer:
    """Owns the code, token, and artifact stores and their lifecycle rules."""

    def __init__(
        self,
        sessions: SessionLookup,
        entropy: Entropy,
        clock: Clock,
        *,
        code_ttl_s: int = 60,
        token_ttl_s: int = 600,
        artifact_ttl_s: int = 300,
    ):
        self._sessions = sessions
        self._entropy = entropy
        self._clock = clock
        self.code_ttl_s = code_ttl_s
        self.token_ttl_s = token_ttl_s
        self.artifact_ttl_s = artifact_ttl_s
        self._codes: dict[str, AuthorizationCode] = {}
        self._tokens: dict[str, AccessToken] = {}
        self._artifacts: dict[str, ArtifactCode] = {}
        self._lock = threading.Lock()

    # -- authorization codes -------------------------------------------------

    def issue_code(self, session: FlowSession) -> AuthorizationCode:
        """Mint a single-use code bound to the session's PKCE challenge,
        client, and redirect URI. Requires phase Approved."""
        with self._lock:
            if session.phase is not Phase.APPROVED:
                raise ProtocolViolation(
                    f"cannot issue code in phase {session.phase.value!r}"
                )
            code = AuthorizationCode(
                code=self._entropy.token_hex(8),
                session_id=session.session_id,
                bound_challenge=session.challenge,
                bound_client_id=session.request.client_id,
                bound_redirect_uri=session.request.redirect_uri,
                issued_at=self._clock.monotonic(),
                ttl_seconds=self.code_ttl_s,
            )
            self._codes[_digest(code.code)] = code
            transition(session, FlowEvent.CODE_ISSUED, self._clock)
            return code

    def redeem_code(
        self,
        code_value: str,
        verifier: PkceVerifier,
        client_id: str,
        redirect_uri: str,
    ) -> AccessToken:
        """Exchange a code for an access token.

        Checks, in order: code exists and is unredeemed; not expired;
        client_id and redirect_uri match the bindings; PKCE verifies.
        On success the code is atomically marked redeemed and the session
        advances to TokenIssued; losers of a redemption race see
        code_already_redeemed.
        """
        with self._lock:
            record = self._codes.get(_digest(code_value))
            if record is None:
                raise InvalidGrant("unknown_code")
            if record.redeemed:
                raise InvalidGrant("code_already_redeemed")
            if record.expired(self._clock.monotonic()):
                raise InvalidGrant("code_expired")
            if client_id != record.bound_client_id:
                raise InvalidGrant("client_mismatch")
            if redirect_uri != record.bound_redirect_uri:
                raise InvalidGrant("redirect_mismatch")
            if not verify_challenge(verifier, record.bound_challenge):
                raise InvalidGrant("pkce_mismatch")

            record.redeemed = True
            session = self._sessions.get(record.session_id)
            if session is None or session.consent is None:
                raise InvalidGrant("session_missing")
            token = AccessToken(
                token=self._entropy.token_hex(16),
                session_id=session.session_id,
                scope=session.consent.scope_shown,
                issued_at=self._clock.monotonic(),
                ttl_seconds=self.token_ttl_s,
            )
            self._tokens[_digest(token.token)] = token
            transition(session, FlowEvent.TOKEN_ISSUED, self._clock)
            return token

    def cancel_code(self, code_value: str) -> None:
        """Burn a code that could not be audited; it must never redeem."""
        with self._lock:
            record = self._codes.get(_digest(code_value))
            if record is not None:
                record.redeemed = True

    # -- access tokens -------------------------------------------------------

    def validate_token(self, token_value: str, required_scope: Scope) -> TokenValidation:
        with self._lock:
            record = self._tokens.get(_digest(token_value))
            if record is None:
                return TokenValidation(valid=False, reason="unknown")
            if record.revoked:
                return TokenValidation(valid=False, reason="revoked")
            if record.expired(self._clock.monotonic()):
                return TokenValidation(valid=False, reason="expired")
            if required_scope not in record.scope:
                return TokenValidation(valid=False, reason="insufficient_scope")
            return TokenValidation(
                valid=True, session_id=record.session_id, scope=record.scope
            )

    def revoke_token(self, token_value: str) -> None:
        with self._lock:
            record = self._tokens.get(_digest(token_value))
            if record is not None:
                record.revoked = True

    # -- offline artifact codes ----------------------------------------------

    def issue_artifact(self, session: FlowSession, base_uri: str) -> ArtifactCode:
        """Mint the single-use authorization link for a branch-initiated flow."""
        with self._lock:
            if session.request.channel is not Channel.BRANCH:
                raise ProtocolViolation("artifact codes are branch-channel only")
            if session.phase is not Phase.INITIATED:
                raise ProtocolViolation(
                    f"cannot issue artifact in phase {session.phase.value!r}"
                )
            value = self._entropy.token_hex(16)
            artifact = ArtifactCode(
                artifact=value,
                request_uri=f"{base_uri.rstrip('/')}/a/{value}",
                session_id=session.session_id,
                issued_at=self._clock.monotonic(),
                ttl_seconds=self.artifact_ttl_s,
            )
            self._artifacts[_digest(value)] = artifact
            return artifact

    def redeem_artifact(self, artifact_value: str) -> FlowSession:
        """Consume an artifact link; returns its session ready for login."""
        with self._lock:
            record = self._artifacts.get(_digest(artifact_value))
            if record is None:
                raise ArtifactError("not_found")
            if record.expired(self._clock.monotonic()):
                raise ArtifactError("link_expired")
            if record.redeemed:
                raise ArtifactError("link_used")
            record.redeemed = True
            session = self._sessions.get(record.session_id)
            if session is None:
                raise ArtifactError("not_found")
            return session
