"""Shared fixtures: a bureau service graph on a manual clock, a TestClient
over its HTTP surface, and a browser-flow driver for walking sessions
through authorize / login / consent / token."""

from __future__ import annotations

import secrets
from urllib.parse import parse_qs, urlsplit

import pytest
from fastapi.testclient import TestClient

from creditconsent.authserver import DEMO_PASSWORD, DEMO_USERNAME
from creditconsent.config import AppConfig
from creditconsent.protocol import derive_challenge, generate_verifier
from creditconsent.runtime import ManualClock, SystemEntropy
from creditconsent.stack import build_app, build_services


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def config():
    return AppConfig()


@pytest.fixture
def services(config, clock):
    return build_services(config, clock=clock)


@pytest.fixture
def bureau(services):
    app = build_app(services["auth"], services["resource"])
    with TestClient(app, raise_server_exceptions=False) as client:
        yield client


class BureauFlow:
    """Walks one inquiry through the bureau's browser endpoints."""

    def __init__(self, client: TestClient, services: dict, scope="email credit_score",
                 subject="John Doe"):
        self.client = client
        self.services = services
        self.scope = scope
        self.subject = subject
        self.entropy = SystemEntropy()
        self.verifier = generate_verifier(self.entropy)
        self.challenge = derive_challenge(self.verifier)
        self.state = secrets.token_hex(12)
        self.client_id = services["config"].bank_client_id
        self.redirect_uri = services["bank"].callback_url
        self.session_id = ""

    def authorize(self, **overrides):
        params = {
            "response_type": "code",
            "client_id": self.client_id,
            "redirect_uri": self.redirect_uri,
            "scope": self.scope,
            "state": self.state,
            "code_challenge": self.challenge.value,
            "code_challenge_method": "S256",
            "subject_hint": self.subject,
        }
        params.update(overrides)
        resp = self.client.get("/authorize", params=params, follow_redirects=False)
        if resp.status_code == 302:
            query = parse_qs(urlsplit(resp.headers["location"]).query)
            self.session_id = query["session"][0]
        return resp

    def login(self, username=DEMO_USERNAME, password=DEMO_PASSWORD):
        return self.client.post(
            "/login",
            data={"session": self.session_id, "username": username,
                  "password": password},
            follow_redirects=False,
        )

    def mfa(self, otp: str):
        return self.client.post(
            "/mfa",
            data={"session": self.session_id, "otp": otp},
            follow_redirects=False,
        )

    def view_consent(self):
        return self.client.get(
            "/consent", params={"session": self.session_id}, follow_redirects=False
        )

    def decide(self, decision: str):
        return self.client.post(
            "/consent",
            data={"session": self.session_id, "decision": decision},
            follow_redirects=False,
        )

    def approve(self) -> tuple[str, str]:
        """Returns (code, state) from the redirect back to the bank."""
        resp = self.decide("approve")
        assert resp.status_code == 302, resp.text
        query = parse_qs(urlsplit(resp.headers["location"]).query)
        return query["code"][0], query["state"][0]

    def exchange(self, code: str, verifier: str | None = None, **overrides):
        body = {
            "grant_type": "authorization_code",
            "code": code,
            "code_verifier": verifier if verifier is not None else self.verifier.value,
            "client_id": self.client_id,
            "redirect_uri": self.redirect_uri,
        }
        body.update(overrides)
        return self.client.post("/token", json=body)

    def obtain_code(self) -> tuple[str, str]:
        assert self.authorize().status_code == 302
        assert self.login().status_code == 302
        assert self.view_consent().status_code == 200
        return self.approve()

    def obtain_token(self) -> str:
        code, _ = self.obtain_code()
        resp = self.exchange(code)
        assert resp.status_code == 200, resp.text
        return resp.json()["access_token"]


@pytest.fixture
def flow(bureau, services):
    return BureauFlow(bureau, services)
