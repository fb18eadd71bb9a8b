"""Credit bureau authorization layer.

HTTP surface (browser endpoints are form-encoded, machine endpoints JSON):

    GET  /authorize         start an online flow, redirects to /login
    GET  /login, POST /login
    POST /forgot            one-time temporary credential pair
    GET  /mfa,   POST /mfa
    GET  /consent, POST /consent
    POST /token             authorization-code exchange
    POST /branch/initiate   back-channel start of an offline branch flow
    GET  /a/{artifact}      single-use SMS authorization link

Owns the session, user, OTP, code, token, and artifact stores. Every
state-changing handler appends to the audit log; if the log cannot be
written the operation fails closed.
"""

from __future__ import annotations

import hmac
import threading
import uuid
from dataclasses import dataclass
from urllib.parse import urlencode

from fastapi import APIRouter, Form, Request
from fastapi.responses import HTMLResponse, JSONResponse, RedirectResponse
from pydantic import BaseModel

from creditconsent import webui
from creditconsent.audit import AuditLog, AuditWriteError, EventKind
from creditconsent.config import AppConfig
from creditconsent.notify import (
    MessageChannel,
    MessageKind,
    Notifier,
    authorization_link_body,
)
from creditconsent.protocol import (
    Channel,
    ConsentDecision,
    Decision,
    FlowEvent,
    FlowSession,
    InquiryRequest,
    InvalidGrant,
    Issuer,
    Phase,
    PkceChallenge,
    PkceVerifier,
    ProtocolViolation,
    Scope,
    StateToken,
    transition,
)
from creditconsent.runtime import Clock, Entropy
from creditconsent.transcript import Transcript
from creditconsent.users import TempCredentials, UserStore

# -- errors -------------------------------------------------------------------


class InvalidRequestError(Exception):
    """Malformed or unregistered authorize-time input; never redirected."""


class InvalidClientError(Exception):
    """Branch back-channel authentication failed."""


class NotFoundError(Exception):
    pass


class AuthenticationFailed(Exception):
    def __init__(self, attempts_remaining: int, terminated: bool = False):
        super().__init__("authentication_failed")
        self.attempts_remaining = attempts_remaining
        self.terminated = terminated


class MfaFailed(Exception):
    def __init__(self, reason: str, attempts_remaining: int, terminated: bool):
        super().__init__(reason)
        self.reason = reason
        self.attempts_remaining = attempts_remaining
        self.terminated = terminated


class UnsupportedGrantType(Exception):
    pass


# -- stores -------------------------------------------------------------------


@dataclass(frozen=True)
class RegisteredClient:
    client_id: str
    display_name: str
    redirect_uris: tuple[str, ...]
    secret: str


class ClientRegistry:
    def __init__(self) -> None:
        self._clients: dict[str, RegisteredClient] = {}

    def register(self, client: RegisteredClient) -> None:
        self._clients[client.client_id] = client

    def get(self, client_id: str) -> RegisteredClient | None:
        return self._clients.get(client_id)

    def check_secret(self, client_id: str, secret: str) -> bool:
        client = self.get(client_id)
        if client is None:
            return False
        return hmac.compare_digest(client.secret.encode(), secret.encode())


class SessionStore:
    """session_id -> FlowSession plus a uniqueness index on state values.
    Unknown lookups fail closed (None)."""

    def __init__(self, clock: Clock, entropy: Entropy):
        self._clock = clock
        self._entropy = entropy
        self._sessions: dict[str, FlowSession] = {}
        self._by_state: dict[str, str] = {}
        self._lock = threading.Lock()

    def create(
        self, request: InquiryRequest, challenge: PkceChallenge, state: StateToken
    ) -> FlowSession:
        with self._lock:
            if state.value in self._by_state:
                raise InvalidRequestError("state value already in use")
            session = FlowSession(
                session_id=self._entropy.token_hex(8),
                request=request,
                challenge=challenge,
                state=state,
                created_at=self._clock.monotonic(),
                created_wall=self._clock.now(),
                updated_at=self._clock.monotonic(),
            )
            self._sessions[session.session_id] = session
            self._by_state[state.value] = session.session_id
            return session

    def get(self, session_id: str) -> FlowSession | None:
        with self._lock:
            return self._sessions.get(session_id)

    def get_by_state(self, state_value: str) -> FlowSession | None:
        with self._lock:
            sid = self._by_state.get(state_value)
            return self._sessions.get(sid) if sid else None

    def all(self) -> list[FlowSession]:
        with self._lock:
            return list(self._sessions.values())


@dataclass
class OtpChallenge:
    session_id: str
    otp: str
    issued_at: float
    ttl_seconds: int
    attempts_remaining: int

    def expired(self, now: float) -> bool:
        return now - self.issued_at > self.ttl_seconds


# -- results ------------------------------------------------------------------


@dataclass(frozen=True)
class LoginOutcome:
    next_step: str  # "otp" | "consent"
    username: str


@dataclass(frozen=True)
class ConsentView:
    client_name: str
    scopes: list[Scope]
    subject_hint: str


@dataclass(frozen=True)
class ApproveOutcome:
    redirect_url: str
    code: str


@dataclass(frozen=True)
class DenyOutcome:
    return_url: str


# -- service ------------------------------------------------------------------


class AuthService:
    def __init__(
        self,
        config: AppConfig,
        clock: Clock,
        entropy: Entropy,
        users: UserStore,
        clients: ClientRegistry,
        sessions: SessionStore,
        issuer: Issuer,
        audit: AuditLog,
        notifier: Notifier,
        transcript: Transcript,
    ):
        self.config = config
        self.clock = clock
        self.entropy = entropy
        self.users = users
        self.clients = clients
        self.sessions = sessions
        self.issuer = issuer
        self.audit = audit
        self.notifier = notifier
        self.transcript = transcript
        self.public_base_url = f"http://127.0.0.1:{config.port}"
        self._otp_challenges: dict[str, OtpChallenge] = {}
        self._login_failures: dict[str, int] = {}
        self._lock = threading.Lock()

    # -- authorize --------------------------------------------------------

    def handle_authorize(self, params: dict[str, str], client_ip: str) -> FlowSession:
        client = self.clients.get(params.get("client_id", ""))
        if client is None:
            raise InvalidRequestError("unknown client_id")
        redirect_uri = params.get("redirect_uri", "")
        if redirect_uri not in client.redirect_uris:
            # never redirect to an unvalidated URI
            raise InvalidRequestError("redirect_uri not registered for this client")
        state_value = params.get("state", "")
        challenge_value = params.get("code_challenge", "")
        method = params.get("code_challenge_method", "S256")
        if method != "S256":
            raise InvalidRequestError("only code_challenge_method=S256 is supported")
        if not challenge_value:
            raise InvalidRequestError("code_challenge is required")
        subject_hint = params.get("subject_hint", "")
        if not subject_hint:
            raise InvalidRequestError("subject_hint is required")
        try:
            state = StateToken(state_value)
            challenge = PkceChallenge(challenge_value)
            scope = Scope.parse_set(params.get("scope", ""))
        except ValueError as exc:
            raise InvalidRequestError(str(exc)) from exc
        request = InquiryRequest(
            request_id=params.get("request_id") or uuid.uuid4().hex,
            channel=Channel.ONLINE,
            client_id=client.client_id,
            redirect_uri=redirect_uri,
            scope=scope,
            subject_hint=subject_hint,
        )
        session = self.sessions.create(request, challenge, state)
        self.audit.append(
            EventKind.AUTHORIZE_INIT,
            client_ip=client_ip,
            subject=session.session_id,
            detail=f"client={client.client_id} scope={Scope.join(scope)} channel=online",
        )
        return session

    # -- login ------------------------------------------------------------

    def handle_login(
        self, session_id: str, username: str, password: str, client_ip: str
    ) -> LoginOutcome:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError("unknown session")
        if session.phase is not Phase.INITIATED:
            raise ProtocolViolation(
                f"login not allowed in phase {session.phase.value!r}"
            )
        identity = self.users.authenticate(username, password)
        if identity is None:
            with self._lock:
                failures = self._login_failures.get(session_id, 0) + 1
                self._login_failures[session_id] = failures
            self.audit.append(
                EventKind.LOGIN_FAILURE,
                client_ip=client_ip,
                subject=session_id,
                detail=f"user={username} failures={failures}",
            )
            if failures >= self.config.login_max_failures:
                self._terminate(session, client_ip, "login lockout")
                raise AuthenticationFailed(attempts_remaining=0, terminated=True)
            raise AuthenticationFailed(
                attempts_remaining=self.config.login_max_failures - failures
            )
        with self._lock:
            transition(session, FlowEvent.AUTHENTICATED, self.clock)
            session.authenticated_user = identity
        self.audit.append(
            EventKind.LOGIN_SUCCESS,
            client_ip=client_ip,
            subject=session_id,
            detail=f"user={username}",
        )
        self.transcript.log(f"✓ Login successful for user: {username}")
        if self.config.mfa_enabled:
            self._issue_otp(session, identity.phone, username)
            return LoginOutcome(next_step="otp", username=username)
        return LoginOutcome(next_step="consent", username=username)

    def issue_temp_credentials(self, username_hint: str = "") -> TempCredentials:
        return self.users.issue_temp_credentials(username_hint)

    def _issue_otp(self, session: FlowSession, phone: str | None, username: str) -> None:
        challenge = OtpChallenge(
            session_id=session.session_id,
            otp=self.entropy.digits(6),
            issued_at=self.clock.monotonic(),
            ttl_seconds=self.config.otp_ttl_s,
            attempts_remaining=self.config.otp_max_attempts,
        )
        with self._lock:
            self._otp_challenges[session.session_id] = challenge
        if phone:
            channel, recipient = MessageChannel.SMS, phone
        else:
            channel, recipient = MessageChannel.EMAIL, f"{username}@users.bureau.test"
        self.notifier.send(
            channel,
            recipient,
            MessageKind.OTP,
            f"Your verification code is {challenge.otp} "
            f"(valid for {challenge.ttl_seconds}s)",
        )

    def handle_mfa(self, session_id: str, otp: str, client_ip: str) -> None:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError("unknown session")
        with self._lock:
            challenge = self._otp_challenges.get(session_id)
        if session.phase is not Phase.AUTHENTICATED or challenge is None:
            raise ProtocolViolation("no OTP challenge pending for this session")
        if challenge.expired(self.clock.monotonic()):
            self.audit.append(
                EventKind.MFA_RESULT,
                client_ip=client_ip,
                subject=session_id,
                detail="expired",
            )
            self._terminate(session, client_ip, "otp expired")
            raise MfaFailed("expired", attempts_remaining=0, terminated=True)
        if not hmac.compare_digest(challenge.otp.encode(), otp.encode()):
            challenge.attempts_remaining -= 1
            self.audit.append(
                EventKind.MFA_RESULT,
                client_ip=client_ip,
                subject=session_id,
                detail=f"wrong remaining={challenge.attempts_remaining}",
            )
            if challenge.attempts_remaining <= 0:
                self._terminate(session, client_ip, "otp attempts exhausted")
                raise MfaFailed("exhausted", attempts_remaining=0, terminated=True)
            raise MfaFailed(
                "wrong",
                attempts_remaining=challenge.attempts_remaining,
                terminated=False,
            )
        with self._lock:
            del self._otp_challenges[session_id]
        self.audit.append(
            EventKind.MFA_RESULT, client_ip=client_ip, subject=session_id, detail="ok"
        )

    # -- consent ------------------------------------------------------------

    def render_consent(self, session_id: str) -> ConsentView:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError("unknown session")
        with self._lock:
            if self._otp_challenges.get(session_id) is not None:
                raise ProtocolViolation("MFA not completed")
            if session.phase is Phase.AUTHENTICATED:
                transition(session, FlowEvent.CONSENT_SHOWN, self.clock)
            elif session.phase is not Phase.CONSENT_PENDING:
                raise ProtocolViolation(
                    f"consent not available in phase {session.phase.value!r}"
                )
        client = self.clients.get(session.request.client_id)
        order = list(Scope)
        return ConsentView(
            client_name=client.display_name if client else session.request.client_id,
            scopes=sorted(session.request.scope, key=order.index),
            subject_hint=session.request.subject_hint,
        )

    def handle_consent(
        self, session_id: str, decision_value: str, client_ip: str
    ) -> ApproveOutcome | DenyOutcome:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError("unknown session")
        if decision_value not in ("approve", "deny"):
            raise InvalidRequestError("decision must be approve or deny")
        approved = decision_value == "approve"
        with self._lock:
            # single-shot: only the first decision finds ConsentPending
            event = FlowEvent.APPROVED if approved else FlowEvent.DENIED
            transition(session, event, self.clock)
            session.consent = ConsentDecision(
                decision=Decision.APPROVED if approved else Decision.DENIED,
                decided_at=self.clock.now(),
                scope_shown=session.request.scope,
            )
        user = session.authenticated_user
        recipient = (user.phone if user else None) or (
            f"{user.username}@users.bureau.test" if user else "unknown@bureau.test"
        )
        channel = (
            MessageChannel.SMS
            if user and user.phone
            else MessageChannel.EMAIL
        )
        if approved:
            self.audit.append(
                EventKind.CONSENT_DECISION,
                decision=Decision.APPROVED,
                client_ip=client_ip,
                subject=session_id,
                detail=f"scope={Scope.join(session.consent.scope_shown)}",
            )
            code = self.issuer.issue_code(session)
            try:
                self.audit.append(
                    EventKind.CODE_ISSUED,
                    client_ip=client_ip,
                    subject=session_id,
                    detail=f"code={code.code} state={session.state.value}",
                )
            except AuditWriteError:
                self.issuer.cancel_code(code.code)
                raise
            self.transcript.log(
                f"Authorization Code Issued: {code.code} "
                f"for state: {session.state.value}"
            )
            self.notifier.send(
                channel,
                recipient,
                MessageKind.OUTCOME_APPROVED,
                f"You approved the credit inquiry by "
                f"{session.request.client_id}.",
            )
            query = urlencode({"code": code.code, "state": session.state.value})
            return ApproveOutcome(
                redirect_url=f"{session.request.redirect_uri}?{query}", code=code.code
            )
        self.audit.append(
            EventKind.CONSENT_DECISION,
            decision=Decision.DENIED,
            client_ip=client_ip,
            subject=session_id,
            detail="unauthorized attempt blocked by user",
        )
        self._terminate(session, client_ip, "consent denied")
        self.notifier.send(
            channel,
            recipient,
            MessageKind.OUTCOME_DENIED,
            f"You denied the credit inquiry by {session.request.client_id}. "
            "No data was shared.",
        )
        query = urlencode({"error": "access_denied", "state": session.state.value})
        return DenyOutcome(return_url=f"{session.request.redirect_uri}?{query}")

    # -- token --------------------------------------------------------------

    def handle_token(
        self,
        grant_type: str,
        code: str,
        code_verifier: str,
        client_id: str,
        redirect_uri: str,
        client_ip: str,
    ) -> dict:
        if grant_type != "authorization_code":
            raise UnsupportedGrantType(grant_type)
        try:
            verifier = PkceVerifier(code_verifier)
        except ValueError as exc:
            self.audit.append(
                EventKind.TOKEN_REJECTED,
                client_ip=client_ip,
                subject=client_id,
                detail="pkce_malformed",
            )
            raise InvalidGrant("pkce_malformed") from exc
        try:
            token = self.issuer.redeem_code(code, verifier, client_id, redirect_uri)
        except InvalidGrant as exc:
            self.audit.append(
                EventKind.TOKEN_REJECTED,
                client_ip=client_ip,
                subject=client_id,
                detail=exc.reason,
            )
            raise
        try:
            self.audit.append(
                EventKind.TOKEN_ISSUED,
                client_ip=client_ip,
                subject=token.session_id,
                detail=f"scope={Scope.join(token.scope)}",
            )
        except AuditWriteError:
            self.issuer.revoke_token(token.token)
            raise
        self.transcript.log(f"✓ Access Token Granted: {token.token}")
        return {
            "access_token": token.token,
            "token_type": "Bearer",
            "expires_in": token.ttl_seconds,
            "scope": Scope.join(token.scope),
        }

    # -- offline branch flow --------------------------------------------------

    def handle_offline_init(self, payload: dict, client_ip: str) -> dict:
        client_id = payload.get("client_id", "")
        if not self.clients.check_secret(client_id, payload.get("client_secret", "")):
            raise InvalidClientError("branch credentials rejected")
        phone = payload.get("customer_phone", "")
        from creditconsent.protocol.types import valid_phone

        if not valid_phone(phone):
            raise InvalidRequestError("customer_phone must be E.164")
        client = self.clients.get(client_id)
        redirect_uri = payload.get("redirect_uri", "")
        if redirect_uri not in client.redirect_uris:
            raise InvalidRequestError("redirect_uri not registered for this client")
        try:
            state = StateToken(payload.get("state", ""))
            challenge = PkceChallenge(payload.get("code_challenge", ""))
            scope = Scope.parse_set(payload.get("scope", ""))
        except ValueError as exc:
            raise InvalidRequestError(str(exc)) from exc
        subject_hint = payload.get("subject_hint", "")
        if not subject_hint:
            raise InvalidRequestError("subject_hint is required")
        request = InquiryRequest(
            request_id=payload.get("request_id") or uuid.uuid4().hex,
            channel=Channel.BRANCH,
            client_id=client_id,
            redirect_uri=redirect_uri,
            scope=scope,
            subject_hint=subject_hint,
        )
        session = self.sessions.create(request, challenge, state)
        self.audit.append(
            EventKind.AUTHORIZE_INIT,
            client_ip=client_ip,
            subject=session.session_id,
            detail=f"client={client_id} scope={Scope.join(scope)} channel=branch",
        )
        artifact = self.issuer.issue_artifact(session, self.public_base_url)
        self.audit.append(
            EventKind.ARTIFACT_ISSUED,
            client_ip=client_ip,
            subject=session.session_id,
            detail=f"expires_in={artifact.ttl_seconds}s",
        )
        self.notifier.send(
            MessageChannel.SMS,
            phone,
            MessageKind.AUTHORIZATION_LINK,
            authorization_link_body(artifact.request_uri, artifact.ttl_seconds),
        )
        return {
            "request_uri": artifact.request_uri,
            "expires_in": artifact.ttl_seconds,
        }

    def open_artifact(self, artifact_value: str, client_ip: str) -> FlowSession:
        session = self.issuer.redeem_artifact(artifact_value)
        self.audit.append(
            EventKind.ARTIFACT_REDEEMED,
            client_ip=client_ip,
            subject=session.session_id,
        )
        return session

    # -- helpers --------------------------------------------------------------

    def _terminate(self, session: FlowSession, client_ip: str, why: str) -> None:
        with self._lock:
            if session.phase in (Phase.TOKEN_ISSUED, Phase.TERMINATED):
                return
            transition(session, FlowEvent.TERMINATED, self.clock)
        self.audit.append(
            EventKind.TERMINATED,
            client_ip=client_ip,
            subject=session.session_id,
            detail=why,
        )


# -- seed data -----------------------------------------------------------------

DEMO_USERNAME = "demo_user"
DEMO_PASSWORD = "demo_password"
DEMO_PHONE = "+15550100"


def seed_demo_data(service: AuthService, bank_redirect_uri: str) -> None:
    """Register the demo bank client and the demo bureau account."""
    service.clients.register(
        RegisteredClient(
            client_id=service.config.bank_client_id,
            display_name=service.config.bank_display_name,
            redirect_uris=(bank_redirect_uri,),
            secret=service.config.bank_client_secret,
        )
    )
    service.users.add_user(DEMO_USERNAME, DEMO_PASSWORD, phone=DEMO_PHONE)


# -- HTTP wiring ----------------------------------------------------------------


class TokenRequest(BaseModel):
    grant_type: str
    code: str = ""
    code_verifier: str = ""
    client_id: str = ""
    redirect_uri: str = ""


class BranchInitRequest(BaseModel):
    client_id: str
    client_secret: str
    redirect_uri: str
    scope: str
    state: str
    code_challenge: str
    code_challenge_method: str = "S256"
    subject_hint: str
    customer_phone: str
    request_id: str | None = None


def _ip(request: Request) -> str:
    return request.client.host if request.client else ""


def build_auth_router(service: AuthService) -> APIRouter:
    router = APIRouter()

    @router.get("/authorize")
    def authorize(request: Request):
        try:
            session = service.handle_authorize(
                dict(request.query_params), _ip(request)
            )
        except InvalidRequestError as exc:
            return HTMLResponse(
                webui.error_page("Invalid request", str(exc)), status_code=400
            )
        return RedirectResponse(
            url=f"/login?session={session.session_id}", status_code=302
        )

    @router.get("/login")
    def login_view(session: str = ""):
        if service.sessions.get(session) is None:
            return HTMLResponse(
                webui.error_page(
                    "Unknown session",
                    "This link is not valid. Restart the request from your bank.",
                ),
                status_code=404,
            )
        return HTMLResponse(webui.login_page(session))

    @router.post("/login")
    def login_submit(
        request: Request,
        session: str = Form(""),
        username: str = Form(""),
        password: str = Form(""),
    ):
        try:
            outcome = service.handle_login(session, username, password, _ip(request))
        except NotFoundError:
            return HTMLResponse(
                webui.error_page("Unknown session", "Restart from your bank portal."),
                status_code=404,
            )
        except ProtocolViolation as exc:
            return HTMLResponse(
                webui.error_page("Not allowed", str(exc)), status_code=409
            )
        except AuthenticationFailed as exc:
            if exc.terminated:
                return HTMLResponse(
                    webui.error_page(
                        "Session locked",
                        "Too many failed attempts. The request was terminated.",
                        page_kind="lockout",
                    ),
                    status_code=403,
                )
            return HTMLResponse(
                webui.login_page(
                    session,
                    error="Invalid username or password.",
                    attempts_remaining=exc.attempts_remaining,
                ),
                status_code=401,
            )
        target = "mfa" if outcome.next_step == "otp" else "consent"
        return RedirectResponse(url=f"/{target}?session={session}", status_code=302)

    @router.post("/forgot")
    def forgot(session: str = Form("")):
        temp = service.issue_temp_credentials()
        return HTMLResponse(webui.forgot_page(session, temp))

    @router.get("/mfa")
    def mfa_view(session: str = ""):
        return HTMLResponse(webui.otp_page(session))

    @router.post("/mfa")
    def mfa_submit(request: Request, session: str = Form(""), otp: str = Form("")):
        try:
            service.handle_mfa(session, otp, _ip(request))
        except NotFoundError:
            return HTMLResponse(
                webui.error_page("Unknown session", "Restart from your bank portal."),
                status_code=404,
            )
        except ProtocolViolation as exc:
            return HTMLResponse(
                webui.error_page("Not allowed", str(exc)), status_code=409
            )
        except MfaFailed as exc:
            if exc.terminated:
                return HTMLResponse(
                    webui.error_page(
                        "Verification failed",
                        "The code expired or too many attempts were made. "
                        "The request was terminated.",
                        page_kind="lockout",
                    ),
                    status_code=403,
                )
            return HTMLResponse(
                webui.otp_page(
                    session,
                    error="Incorrect code.",
                    attempts_remaining=exc.attempts_remaining,
                ),
                status_code=401,
            )
        return RedirectResponse(url=f"/consent?session={session}", status_code=302)

    @router.get("/consent")
    def consent_view(session: str = ""):
        try:
            view = service.render_consent(session)
        except NotFoundError:
            return HTMLResponse(
                webui.error_page("Unknown session", "Restart from your bank portal."),
                status_code=404,
            )
        except ProtocolViolation as exc:
            return HTMLResponse(
                webui.error_page("Not allowed", str(exc)), status_code=409
            )
        return HTMLResponse(
            webui.consent_page(session, view.client_name, view.scopes, view.subject_hint)
        )

    @router.post("/consent")
    def consent_submit(
        request: Request, session: str = Form(""), decision: str = Form("")
    ):
        try:
            outcome = service.handle_consent(session, decision, _ip(request))
        except NotFoundError:
            return HTMLResponse(
                webui.error_page("Unknown session", "Restart from your bank portal."),
                status_code=404,
            )
        except (ProtocolViolation, InvalidRequestError) as exc:
            return HTMLResponse(
                webui.error_page("Not allowed", str(exc)), status_code=409
            )
        if isinstance(outcome, ApproveOutcome):
            return RedirectResponse(url=outcome.redirect_url, status_code=302)
        return HTMLResponse(webui.denial_page(outcome.return_url))

    @router.post("/token")
    def token(request: Request, body: TokenRequest):
        try:
            payload = service.handle_token(
                body.grant_type,
                body.code,
                body.code_verifier,
                body.client_id,
                body.redirect_uri,
                _ip(request),
            )
        except UnsupportedGrantType:
            return JSONResponse(
                {"error": "unsupported_grant_type"}, status_code=400
            )
        except InvalidGrant:
            return JSONResponse({"error": "invalid_grant"}, status_code=400)
        return JSONResponse(payload)

    @router.post("/branch/initiate")
    def branch_initiate(request: Request, body: BranchInitRequest):
        try:
            payload = service.handle_offline_init(body.model_dump(), _ip(request))
        except InvalidClientError:
            return JSONResponse({"error": "invalid_client"}, status_code=401)
        except InvalidRequestError as exc:
            return JSONResponse(
                {"error": "invalid_request", "detail": str(exc)}, status_code=400
            )
        return JSONResponse(payload)

    @router.get("/a/{artifact}")
    def open_artifact(request: Request, artifact: str):
        from creditconsent.protocol import ArtifactError

        try:
            session = service.open_artifact(artifact, _ip(request))
        except ArtifactError as exc:
            service.audit.append(
                EventKind.ARTIFACT_REDEEMED,
                client_ip=_ip(request),
                subject="",
                detail=f"rejected: {exc.reason}",
            )
            if exc.reason == "not_found":
                return HTMLResponse(
                    webui.error_page(
                        "Link not found", "This authorization link does not exist."
                    ),
                    status_code=404,
                )
            if exc.reason == "link_expired":
                return HTMLResponse(
                    webui.error_page(
                        "Link expired",
                        "This authorization link has expired. "
                        "Ask the branch to send a new one.",
                        page_kind="link-expired",
                    ),
                    status_code=410,
                )
            return HTMLResponse(
                webui.error_page(
                    "Link already used",
                    "This authorization link was already used.",
                    page_kind="link-used",
                ),
                status_code=410,
            )
        return RedirectResponse(
            url=f"/login?session={session.session_id}", status_code=302
        )

    return router
