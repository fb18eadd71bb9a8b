"""Composition root: wire the stores and services together, mount every
router on one app (the PoC topology: a single process on port 5055), and
run it on an embedded server thread."""

from __future__ import annotations

import threading
import time
from pathlib import Path

import uvicorn
from fastapi import FastAPI
from fastapi.staticfiles import StaticFiles

from creditconsent.audit import AuditLog
from creditconsent.authserver import (
    AuthService,
    ClientRegistry,
    SessionStore,
    build_auth_router,
    seed_demo_data,
)
from creditconsent.bankclient import BankService, BureauGateway, build_bank_router
from creditconsent.config import AppConfig
from creditconsent.notify import Notifier, build_gateway
from creditconsent.protocol import Issuer
from creditconsent.resourceapi import (
    RateLimiter,
    ResourceService,
    SubjectStore,
    build_resource_router,
    seed_demo_subjects,
)
from creditconsent.runtime import Clock, SystemClock, make_entropy
from creditconsent.transcript import Transcript
from creditconsent.users import UserStore

_STATIC_DIR = Path(__file__).resolve().parents[2] / "frontend" / "dist"


def build_services(
    config: AppConfig,
    *,
    seed: int | None = None,
    clock: Clock | None = None,
    audit_path: str | Path | None = None,
) -> dict:
    """Construct the full service graph sharing one clock, entropy source,
    audit log, notifier, and transcript."""
    clock = clock or SystemClock()
    entropy = make_entropy(seed)
    audit = AuditLog(clock, path=audit_path)
    notifier = Notifier(build_gateway(config.gateway, clock, config.gateway_file), clock)
    transcript = Transcript(clock)
    users = UserStore(clock, entropy, temp_ttl_s=config.ttl_temp_credential_s)
    clients = ClientRegistry()
    sessions = SessionStore(clock, entropy)
    issuer = Issuer(
        sessions,
        entropy,
        clock,
        code_ttl_s=config.ttl_auth_code_s,
        token_ttl_s=config.ttl_token_s,
        artifact_ttl_s=config.ttl_artifact_s,
    )
    auth = AuthService(
        config, clock, entropy, users, clients, sessions, issuer, audit, notifier,
        transcript,
    )
    subjects = SubjectStore()
    seed_demo_subjects(subjects)
    limiter = RateLimiter(clock, config.rate_capacity, config.rate_refill_per_min)
    resource = ResourceService(clock, issuer, sessions, subjects, limiter, audit, transcript)
    gateway = BureauGateway(f"http://127.0.0.1:{config.port}")
    bank = BankService(config, clock, entropy, gateway, audit)
    bank.callback_url = f"http://127.0.0.1:{config.port}/client/callback"
    seed_demo_data(auth, bank.callback_url)
    return {
        "config": config,
        "clock": clock,
        "entropy": entropy,
        "audit": audit,
        "notifier": notifier,
        "transcript": transcript,
        "users": users,
        "clients": clients,
        "sessions": sessions,
        "issuer": issuer,
        "auth": auth,
        "subjects": subjects,
        "limiter": limiter,
        "resource": resource,
        "gateway": gateway,
        "bank": bank,
    }


def build_app(
    auth: AuthService,
    resource: ResourceService,
    bank: BankService | None = None,
    static_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="creditconsent", docs_url=None, redoc_url=None)
    app.include_router(build_auth_router(auth))
    app.include_router(build_resource_router(resource))
    if bank is not None:
        app.include_router(build_bank_router(bank))
    static = static_dir if static_dir is not None else _STATIC_DIR
    if static.is_dir():
        app.mount("/static", StaticFiles(directory=static), name="static")
    return app


class ServiceStack:
    """Everything in one process on an embedded uvicorn server.

    Port 0 picks an ephemeral port; public URLs on the services are fixed
    up once the socket is bound. Use as a context manager.
    """

    def __init__(
        self,
        config: AppConfig | None = None,
        *,
        seed: int | None = None,
        port: int | None = None,
        audit_path: str | Path | None = None,
        clock: Clock | None = None,
    ):
        self.config = config or AppConfig()
        self.services = build_services(
            self.config, seed=seed, clock=clock, audit_path=audit_path
        )
        # registered redirect URI must match the bound port; placeholder
        # until start() learns it
        self._requested_port = self.config.port if port is None else port
        self._server: uvicorn.Server | None = None
        self._thread: threading.Thread | None = None
        self.base_url = ""

    def __getattr__(self, name: str):
        try:
            return self.services[name]
        except KeyError as exc:
            raise AttributeError(name) from exc

    def start(self, timeout_s: float = 10.0) -> "ServiceStack":
        app = build_app(
            self.services["auth"], self.services["resource"], self.services["bank"]
        )
        server_config = uvicorn.Config(
            app,
            host="127.0.0.1",
            port=self._requested_port,
            log_level="warning",
            access_log=False,
        )
        self._server = uvicorn.Server(server_config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()
        deadline = time.monotonic() + timeout_s
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("embedded server failed to start")
            if not self._thread.is_alive():
                raise RuntimeError("embedded server exited during startup")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        self.base_url = f"http://127.0.0.1:{port}"
        self._wire_urls(self.base_url)
        return self

    def _wire_urls(self, base_url: str) -> None:
        auth: AuthService = self.services["auth"]
        bank: BankService = self.services["bank"]
        auth.public_base_url = base_url
        bank.gateway.base_url = base_url
        bank.callback_url = f"{base_url}/client/callback"
        # re-register the bank client against the port actually bound
        client = auth.clients.get(self.config.bank_client_id)
        if client is not None:
            auth.clients.register(
                type(client)(
                    client_id=client.client_id,
                    display_name=client.display_name,
                    redirect_uris=(bank.callback_url,),
                    secret=client.secret,
                )
            )

    def stop(self) -> None:
        if self._server is not None:
            self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=10.0)
        self.services["audit"].close()

    def __enter__(self) -> "ServiceStack":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
