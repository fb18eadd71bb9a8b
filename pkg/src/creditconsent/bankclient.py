"""Bank digital system: initiates online inquiries, receives the
authorization callback, exchanges the code over the back channel, fetches
the report, and drives the offline branch flow.

    GET  /client/start          begin an online inquiry (returns authorize URL)
    GET  /client/callback       redirect target for the bureau
    POST /client/branch         teller-initiated offline inquiry
    GET  /client/status/{id}    poll a flow (by state) or ticket (by id)

The PKCE verifier never leaves the pending-flow store except inside the
back-channel token exchange; a mismatched callback state is rejected with
zero bureau calls.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass
from enum import Enum

import httpx
from fastapi import APIRouter, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from creditconsent.audit import AuditLog, EventKind
from creditconsent.config import AppConfig
from creditconsent.protocol import (
    Channel,
    InquiryRequest,
    PkceVerifier,
    Scope,
    StateToken,
    derive_challenge,
    generate_verifier,
)
from creditconsent.protocol.types import valid_phone
from creditconsent.resourceapi import CreditReport
from creditconsent.runtime import Clock, Entropy


class FlowStatus(str, Enum):
    AWAITING_CALLBACK = "AwaitingCallback"
    EXCHANGING = "Exchanging"
    COMPLETED = "Completed"
    FAILED = "Failed"
    DENIED = "Denied"


class TicketStatus(str, Enum):
    SMS_SENT = "SmsSent"
    COMPLETED = "Completed"
    DENIED = "Denied"
    EXPIRED = "Expired"


@dataclass
class PendingFlow:
    state: StateToken
    verifier: PkceVerifier
    request: InquiryRequest
    created_at: float
    status: FlowStatus = FlowStatus.AWAITING_CALLBACK
    report: CreditReport | None = None
    error: str | None = None
    denied_at: str | None = None


@dataclass
class BranchTicket:
    ticket_id: str
    customer_phone: str
    request_uri: str
    expires_at: float
    state_value: str
    status: TicketStatus = TicketStatus.SMS_SENT


class BureauUnreachable(Exception):
    pass


class BureauGateway:
    """Back-channel HTTP client for the bureau's machine endpoints."""

    def __init__(self, base_url: str, http: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self._http = http or httpx.Client(timeout=10.0)

    def exchange_token(
        self, code: str, verifier: str, client_id: str, redirect_uri: str
    ) -> tuple[int, dict]:
        try:
            resp = self._http.post(
                f"{self.base_url}/token",
                json={
                    "grant_type": "authorization_code",
                    "code": code,
                    "code_verifier": verifier,
                    "client_id": client_id,
                    "redirect_uri": redirect_uri,
                },
            )
        except httpx.HTTPError as exc:
            raise BureauUnreachable(str(exc)) from exc
        return resp.status_code, resp.json()

    def fetch_report(self, access_token: str, client_id: str) -> tuple[int, dict]:
        try:
            resp = self._http.get(
                f"{self.base_url}/api/credit-report",
                headers={
                    "Authorization": f"Bearer {access_token}",
                    "X-Client-Id": client_id,
                },
            )
        except httpx.HTTPError as exc:
            raise BureauUnreachable(str(exc)) from exc
        return resp.status_code, resp.json()

    def branch_initiate(self, payload: dict) -> tuple[int, dict]:
        try:
            resp = self._http.post(f"{self.base_url}/branch/initiate", json=payload)
        except httpx.HTTPError as exc:
            raise BureauUnreachable(str(exc)) from exc
        return resp.status_code, resp.json()


class BankService:
    def __init__(
        self,
        config: AppConfig,
        clock: Clock,
        entropy: Entropy,
        gateway: BureauGateway,
        audit: AuditLog,
    ):
        self.config = config
        self.clock = clock
        self.entropy = entropy
        self.gateway = gateway
        self.audit = audit
        self.callback_url = "http://127.0.0.1:5056/client/callback"
        self._flows: dict[str, PendingFlow] = {}
        self._tickets: dict[str, BranchTicket] = {}
        self._ticket_by_state: dict[str, str] = {}
        self._lock = threading.Lock()

    # -- online flow --------------------------------------------------------

    def start_online_inquiry(self, customer_hint: str, scope: frozenset[Scope]) -> dict:
        """Mint PKCE material and a state token, park the flow, and return
        the bureau authorize URL for the user agent to follow."""
        verifier = generate_verifier(self.entropy)
        challenge = derive_challenge(verifier)
        state = StateToken(self.entropy.token_hex(12))
        request = InquiryRequest(
            request_id=uuid.uuid4().hex,
            channel=Channel.ONLINE,
            client_id=self.config.bank_client_id,
            redirect_uri=self.callback_url,
            scope=scope,
            subject_hint=customer_hint,
        )
        with self._lock:
            self._flows[state.value] = PendingFlow(
                state=state,
                verifier=verifier,
                request=request,
                created_at=self.clock.monotonic(),
            )
        params = httpx.QueryParams(
            {
                "response_type": "code",
                "client_id": request.client_id,
                "redirect_uri": request.redirect_uri,
                "scope": Scope.join(request.scope),
                "state": state.value,
                "code_challenge": challenge.value,
                "code_challenge_method": challenge.method,
                "subject_hint": customer_hint,
                "request_id": request.request_id,
            }
        )
        return {
            "authorize_url": f"{self.gateway.base_url}/authorize?{params}",
            "state": state.value,
        }

    def handle_callback(self, params: dict[str, str], client_ip: str) -> dict:
        state_value = params.get("state", "")
        with self._lock:
            flow = self._flows.get(state_value)
        if flow is None:
            self.audit.append(
                EventKind.CSRF_REJECTED,
                client_ip=client_ip,
                subject=state_value or "(missing state)",
                detail="callback state does not match any pending flow",
            )
            return {"status": "csrf_rejected"}
        if params.get("error"):
            with self._lock:
                if flow.status is FlowStatus.AWAITING_CALLBACK:
                    flow.status = FlowStatus.DENIED
                    flow.denied_at = self.clock.now().isoformat()
                    self._mark_ticket(state_value, TicketStatus.DENIED)
            return self._flow_status(flow)
        with self._lock:
            if flow.status is not FlowStatus.AWAITING_CALLBACK:
                # idempotent: a replayed callback never triggers a second exchange
                return self._flow_status_locked(flow)
            flow.status = FlowStatus.EXCHANGING
        code = params.get("code", "")
        try:
            status, body = self.gateway.exchange_token(
                code,
                flow.verifier.value,
                flow.request.client_id,
                flow.request.redirect_uri,
            )
        except BureauUnreachable as exc:
            return self._fail(flow, f"transport: {exc}")
        if status != 200:
            return self._fail(flow, body.get("error", f"http_{status}"))
        try:
            status, report_body = self.gateway.fetch_report(
                body["access_token"], flow.request.client_id
            )
        except BureauUnreachable as exc:
            return self._fail(flow, f"transport: {exc}")
        if status != 200:
            return self._fail(flow, report_body.get("error", f"http_{status}"))
        with self._lock:
            flow.report = CreditReport(**report_body)
            flow.status = FlowStatus.COMPLETED
            self._mark_ticket(state_value, TicketStatus.COMPLETED)
        return self._flow_status(flow)

    def _fail(self, flow: PendingFlow, error: str) -> dict:
        with self._lock:
            flow.status = FlowStatus.FAILED
            flow.error = error
        return self._flow_status(flow)

    # -- branch flow ----------------------------------------------------------

    def start_branch_inquiry(
        self, customer_hint: str, phone: str, scope: frozenset[Scope]
    ) -> dict:
        if not valid_phone(phone):
            raise ValueError("phone must be E.164, like +15550100")
        verifier = generate_verifier(self.entropy)
        challenge = derive_challenge(verifier)
        state = StateToken(self.entropy.token_hex(12))
        request = InquiryRequest(
            request_id=uuid.uuid4().hex,
            channel=Channel.BRANCH,
            client_id=self.config.bank_client_id,
            redirect_uri=self.callback_url,
            scope=scope,
            subject_hint=customer_hint,
        )
        status, body = self.gateway.branch_initiate(
            {
                "client_id": request.client_id,
                "client_secret": self.config.bank_client_secret,
                "redirect_uri": request.redirect_uri,
                "scope": Scope.join(request.scope),
                "state": state.value,
                "code_challenge": challenge.value,
                "code_challenge_method": challenge.method,
                "subject_hint": customer_hint,
                "customer_phone": phone,
                "request_id": request.request_id,
            }
        )
        if status != 200:
            raise BureauRejection(body.get("error", f"http_{status}"), status)
        ticket = BranchTicket(
            ticket_id=f"ticket_{self.entropy.token_hex(6)}",
            customer_phone=phone,
            request_uri=body["request_uri"],
            expires_at=self.clock.monotonic() + body["expires_in"],
            state_value=state.value,
        )
        with self._lock:
            self._flows[state.value] = PendingFlow(
                state=state,
                verifier=verifier,
                request=request,
                created_at=self.clock.monotonic(),
            )
            self._tickets[ticket.ticket_id] = ticket
            self._ticket_by_state[state.value] = ticket.ticket_id
        return {
            "ticket_id": ticket.ticket_id,
            "request_uri": ticket.request_uri,
            "expires_in": body["expires_in"],
            "status": ticket.status.value,
        }

    def _mark_ticket(self, state_value: str, status: TicketStatus) -> None:
        # caller holds the lock
        ticket_id = self._ticket_by_state.get(state_value)
        if ticket_id is not None:
            self._tickets[ticket_id].status = status

    # -- polling ----------------------------------------------------------------

    def poll_flow(self, identifier: str) -> dict | None:
        """Status by ticket_id (branch) or state value (online)."""
        with self._lock:
            ticket = self._tickets.get(identifier)
            if ticket is not None:
                if (
                    ticket.status is TicketStatus.SMS_SENT
                    and self.clock.monotonic() > ticket.expires_at
                ):
                    ticket.status = TicketStatus.EXPIRED
                flow = self._flows.get(ticket.state_value)
                payload = {
                    "ticket_id": ticket.ticket_id,
                    "status": ticket.status.value,
                    "request_uri": ticket.request_uri,
                }
                if flow is not None and flow.report is not None:
                    payload["report"] = flow.report.to_dict()
                if flow is not None and flow.denied_at is not None:
                    payload["denied_at"] = flow.denied_at
                return payload
            flow = self._flows.get(identifier)
            if flow is None:
                return None
            return self._flow_status_locked(flow)

    def _flow_status(self, flow: PendingFlow) -> dict:
        with self._lock:
            return self._flow_status_locked(flow)

    def _flow_status_locked(self, flow: PendingFlow) -> dict:
        status = flow.status.value
        if (
            flow.status is FlowStatus.AWAITING_CALLBACK
            and self.clock.monotonic() - flow.created_at > self.config.pending_flow_ttl_s
        ):
            status = "Expired"
        payload: dict = {"state": flow.state.value, "status": status}
        if flow.report is not None:
            payload["report"] = flow.report.to_dict()
        if flow.error is not None:
            payload["error"] = flow.error
        if flow.denied_at is not None:
            payload["denied_at"] = flow.denied_at
        return payload


class BureauRejection(Exception):
    def __init__(self, error: str, status: int):
        super().__init__(error)
        self.error = error
        self.status = status


class BranchInquiry(BaseModel):
    customer_hint: str
    phone: str
    scope: str = "email credit_score"


def build_bank_router(service: BankService) -> APIRouter:
    router = APIRouter()

    @router.get("/client/start")
    def start(customer: str = "John Doe", scope: str = "email credit_score"):
        try:
            scopes = Scope.parse_set(scope)
        except ValueError as exc:
            return JSONResponse(
                {"error": "invalid_request", "detail": str(exc)}, status_code=400
            )
        return JSONResponse(service.start_online_inquiry(customer, scopes))

    @router.get("/client/callback")
    def callback(request: Request):
        client_ip = request.client.host if request.client else ""
        result = service.handle_callback(dict(request.query_params), client_ip)
        status = 403 if result.get("status") == "csrf_rejected" else 200
        return JSONResponse(result, status_code=status)

    @router.post("/client/branch")
    def branch(body: BranchInquiry):
        try:
            scopes = Scope.parse_set(body.scope)
            result = service.start_branch_inquiry(body.customer_hint, body.phone, scopes)
        except ValueError as exc:
            return JSONResponse(
                {"error": "invalid_request", "detail": str(exc)}, status_code=400
            )
        except BureauRejection as exc:
            return JSONResponse(
                {"error": exc.error, "bureau_status": exc.status}, status_code=502
            )
        except BureauUnreachable as exc:
            return JSONResponse(
                {"error": "bureau_unreachable", "detail": str(exc)}, status_code=502
            )
        return JSONResponse(result)

    @router.get("/client/status/{identifier}")
    def status(identifier: str):
        result = service.poll_flow(identifier)
        if result is None:
            return JSONResponse({"error": "not_found"}, status_code=404)
        return JSONResponse(result)

    return router
