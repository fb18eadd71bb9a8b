"""Scenario runner: drives scripted end-to-end flows as a simulated user
agent plus bank client, and emits PoC-style transcripts with latency
metrics.

A scenario is a JSON file:

    {
      "name": "approve-online",
      "channel": "online",
      "customer": "John Doe",
      "scope": "email credit_score",
      "script": [
        {"action": "login", "username": "demo_user", "password": "demo_password"},
        {"action": "consent", "decision": "approve"}
      ],
      "expected_terminal": "Completed",
      "config": {}
    }

Actions: login (optional "expect": "success"|"failure"), otp (behavior
"correct"|"wrong"), consent (decision "approve"|"deny"), open_link (branch
only, consumes the SMS'd authorization link), delay (seconds).
"""

from __future__ import annotations

import html
import json
import re
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from urllib.parse import parse_qs, urljoin, urlsplit

import httpx

from creditconsent.audit import EventKind
from creditconsent.config import AppConfig
from creditconsent.notify import MessageKind
from creditconsent.protocol.types import Channel
from creditconsent.stack import ServiceStack

_OTP_RE = re.compile(r"\b(\d{6})\b")
_RETURN_LINK_RE = re.compile(r'href="([^"]+)" id="return-link"')


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    channel: Channel
    script: tuple[dict, ...]
    expected_terminal: str
    customer: str = "John Doe"
    phone: str = "+15550100"
    scope: str = "email credit_score"
    config_overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        has_open_link = any(a.get("action") == "open_link" for a in self.script)
        if self.channel is Channel.BRANCH and not has_open_link:
            raise ScenarioError("branch scenarios must open the SMS link")
        if self.channel is Channel.ONLINE and has_open_link:
            raise ScenarioError("open_link is a branch-only action")

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        return cls(
            name=raw["name"],
            channel=Channel(raw["channel"]),
            script=tuple(raw["script"]),
            expected_terminal=raw["expected_terminal"],
            customer=raw.get("customer", "John Doe"),
            phone=raw.get("phone", "+15550100"),
            scope=raw.get("scope", "email credit_score"),
            config_overrides=raw.get("config", {}),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def builtin_scenario_dir() -> Path:
    return Path(str(resources.files("creditconsent.scenarios")))


def load_scenario(name_or_path: str) -> Scenario:
    """A path wins if it exists; otherwise resolve a builtin by name."""
    path = Path(name_or_path)
    if path.is_file():
        return Scenario.from_file(path)
    builtin = builtin_scenario_dir() / f"{name_or_path}.json"
    if builtin.is_file():
        return Scenario.from_file(builtin)
    raise ScenarioError(f"no scenario file or builtin named {name_or_path!r}")


@dataclass
class RunMetrics:
    authorize_to_login_ms: float | None = None
    login_to_consent_ms: float | None = None
    consent_to_terminal_ms: float | None = None
    denial_termination_ms: float | None = None
    notification_latency_ms: float | None = None
    wall_time_ms: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class ScenarioResult:
    name: str
    terminal: str
    expected_terminal: str
    transcript: str
    metrics: RunMetrics
    audit_path: str | None = None

    @property
    def ok(self) -> bool:
        return self.terminal == self.expected_terminal


def _parse_rfc3339(ts: str) -> datetime:
    return datetime.fromisoformat(ts.replace("Z", "+00:00"))


class _Driver:
    """One scenario execution against a running stack (or remote base URL)."""

    def __init__(self, base_url: str, stack: ServiceStack | None):
        self.base_url = base_url
        self.stack = stack
        self.http = httpx.Client(follow_redirects=False, timeout=30.0)
        self.metrics = RunMetrics()
        self.session_id = ""
        self.state = ""
        self.ticket_id = ""
        self.request_uri = ""
        self.terminal = "Failed"
        self.visited: list[str] = []
        self._post_login_t0: float | None = None

    def get(self, url: str) -> httpx.Response:
        absolute = urljoin(self.base_url + "/", url)
        self.visited.append(absolute)
        return self.http.get(absolute)

    def post_form(self, path: str, data: dict) -> httpx.Response:
        return self.http.post(urljoin(self.base_url + "/", path), data=data)

    def close(self) -> None:
        self.http.close()

    # -- flow steps -----------------------------------------------------------

    def start_online(self, customer: str, scope: str) -> None:
        resp = self.get(f"/client/start?customer={customer}&scope={scope}")
        resp.raise_for_status()
        body = resp.json()
        self.state = body["state"]
        t0 = time.perf_counter()
        resp = self.get(body["authorize_url"])
        if resp.status_code != 302:
            raise ScenarioError(f"authorize failed: {resp.status_code} {resp.text}")
        login_url = resp.headers["location"]
        self.session_id = parse_qs(urlsplit(login_url).query)["session"][0]
        resp = self.get(login_url)
        resp.raise_for_status()
        self.metrics.authorize_to_login_ms = (time.perf_counter() - t0) * 1000

    def start_branch(self, customer: str, phone: str, scope: str) -> None:
        resp = self.http.post(
            urljoin(self.base_url + "/", "/client/branch"),
            json={"customer_hint": customer, "phone": phone, "scope": scope},
        )
        if resp.status_code != 200:
            raise ScenarioError(f"branch init failed: {resp.status_code} {resp.text}")
        body = resp.json()
        self.ticket_id = body["ticket_id"]
        self.request_uri = body["request_uri"]
        if self.stack is not None:
            links = self.stack.notifier.list_deliveries(
                kind=MessageKind.AUTHORIZATION_LINK
            )
            if links:
                latency = links[-1].latency_s()
                if latency is not None:
                    self.metrics.notification_latency_ms = latency * 1000

    def open_link(self) -> None:
        t0 = time.perf_counter()
        resp = self.get(self.request_uri)
        if resp.status_code != 302:
            raise ScenarioError(
                f"authorization link rejected: {resp.status_code}"
            )
        login_url = resp.headers["location"]
        self.session_id = parse_qs(urlsplit(login_url).query)["session"][0]
        resp = self.get(login_url)
        resp.raise_for_status()
        self.metrics.authorize_to_login_ms = (time.perf_counter() - t0) * 1000

    def login(self, action: dict) -> None:
        t0 = time.perf_counter()
        resp = self.post_form(
            "/login",
            {
                "session": self.session_id,
                "username": action["username"],
                "password": action["password"],
            },
        )
        expected = action.get("expect", "success")
        if expected == "failure":
            if resp.status_code not in (401, 403):
                raise ScenarioError(
                    f"login unexpectedly succeeded ({resp.status_code})"
                )
            return
        if resp.status_code != 302:
            raise ScenarioError(f"login failed: {resp.status_code}")
        next_url = resp.headers["location"]
        if "/consent" in next_url:
            resp = self.get(next_url)
            resp.raise_for_status()
            self.metrics.login_to_consent_ms = (time.perf_counter() - t0) * 1000
        # /mfa: the otp action fetches and renders consent afterwards
        self._post_login_t0 = t0

    def otp(self, action: dict) -> None:
        behavior = action.get("behavior", "correct")
        code = self._fetch_otp()
        if behavior == "wrong":
            wrong = f"{(int(code) + 1) % 1000000:06d}"
            resp = self.post_form("/mfa", {"session": self.session_id, "otp": wrong})
            if resp.status_code not in (401, 403):
                raise ScenarioError("wrong OTP unexpectedly accepted")
            return
        resp = self.post_form("/mfa", {"session": self.session_id, "otp": code})
        if resp.status_code != 302:
            raise ScenarioError(f"OTP rejected: {resp.status_code}")
        resp = self.get(resp.headers["location"])
        resp.raise_for_status()
        if getattr(self, "_post_login_t0", None) is not None:
            self.metrics.login_to_consent_ms = (
                time.perf_counter() - self._post_login_t0
            ) * 1000

    def _fetch_otp(self) -> str:
        if self.stack is None:
            raise ScenarioError("otp actions need the all-in-one stack")
        messages = self.stack.notifier.list_deliveries(kind=MessageKind.OTP)
        if not messages:
            raise ScenarioError("no OTP was dispatched")
        match = _OTP_RE.search(messages[-1].body)
        if match is None:
            raise ScenarioError("OTP body did not contain a 6-digit code")
        return match.group(1)

    def consent(self, action: dict) -> None:
        decision = action.get("decision", "approve")
        wall_before = datetime.now(timezone.utc)
        t0 = time.perf_counter()
        resp = self.post_form(
            "/consent", {"session": self.session_id, "decision": decision}
        )
        if decision == "approve":
            if resp.status_code != 302:
                raise ScenarioError(f"approve failed: {resp.status_code} {resp.text}")
            callback_url = resp.headers["location"]
            resp = self.get(callback_url)
            body = resp.json()
            self.terminal = body.get("status", "Failed")
            self.metrics.consent_to_terminal_ms = (time.perf_counter() - t0) * 1000
        else:
            if resp.status_code != 200:
                raise ScenarioError(f"deny failed: {resp.status_code}")
            self.metrics.consent_to_terminal_ms = (time.perf_counter() - t0) * 1000
            self._record_denial_latency(wall_before)
            match = _RETURN_LINK_RE.search(resp.text)
            if match is not None:
                back = self.get(html.unescape(match.group(1)))
                if back.status_code == 200:
                    self.terminal = back.json().get("status", "Denied")
                else:
                    self.terminal = "Denied"
            else:
                self.terminal = "Denied"
        if self.ticket_id:
            status = self.get(f"/client/status/{self.ticket_id}").json()
            self.terminal = status.get("status", self.terminal)

    def _record_denial_latency(self, wall_before: datetime) -> None:
        if self.stack is None:
            return
        for event in self.stack.audit.query(kind=EventKind.TERMINATED):
            if event.subject == self.session_id:
                delta = _parse_rfc3339(event.timestamp) - wall_before
                self.metrics.denial_termination_ms = delta.total_seconds() * 1000
                return

    def finish_notification_metric(self) -> None:
        if self.stack is None or self.metrics.notification_latency_ms is not None:
            return
        outcomes = self.stack.notifier.list_deliveries()
        for message in reversed(outcomes):
            latency = message.latency_s()
            if latency is not None:
                self.metrics.notification_latency_ms = latency * 1000
                return


def run_scenario(
    scenario: Scenario,
    config: AppConfig | None = None,
    *,
    seed: int | None = None,
    base_url: str | None = None,
    port: int | None = None,
    audit_path: str | Path | None = None,
) -> ScenarioResult:
    """Execute one scenario. With no base_url, an all-in-one stack is booted
    for the run; against a remote base_url only the HTTP surface is used and
    stack-introspection metrics stay None."""
    config = config or AppConfig()
    if scenario.config_overrides:
        merged = {**config.__dict__, **scenario.config_overrides}
        config = AppConfig.from_dict(merged)
    stack: ServiceStack | None = None
    if base_url is None:
        stack = ServiceStack(
            config, seed=seed, port=port, audit_path=audit_path
        ).start()
        base_url = stack.base_url
    driver = _Driver(base_url, stack)
    wall_t0 = time.perf_counter()
    try:
        if scenario.channel is Channel.ONLINE:
            driver.start_online(scenario.customer, scenario.scope)
        else:
            driver.start_branch(scenario.customer, scenario.phone, scenario.scope)
        for action in scenario.script:
            kind = action.get("action")
            if kind == "open_link":
                driver.open_link()
            elif kind == "login":
                driver.login(action)
            elif kind == "otp":
                driver.otp(action)
            elif kind == "consent":
                driver.consent(action)
            elif kind == "delay":
                time.sleep(float(action.get("seconds", 0)))
            else:
                raise ScenarioError(f"unknown action {kind!r}")
        driver.finish_notification_metric()
        driver.metrics.wall_time_ms = (time.perf_counter() - wall_t0) * 1000
        transcript = stack.transcript.text() if stack else "\n".join(driver.visited)
        return ScenarioResult(
            name=scenario.name,
            terminal=driver.terminal,
            expected_terminal=scenario.expected_terminal,
            transcript=transcript,
            metrics=driver.metrics,
            audit_path=str(stack.audit.path) if stack and stack.audit.path else None,
        )
    finally:
        driver.close()
        if stack is not None:
            stack.stop()


@dataclass
class SuiteResult:
    results: list[ScenarioResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)


def run_suite(
    directory: str | Path,
    config: AppConfig | None = None,
    *,
    seed: int | None = None,
) -> SuiteResult:
    """Run every *.json scenario in a directory, each on a fresh stack."""
    directory = Path(directory)
    files = sorted(directory.glob("*.json"))
    if not files:
        raise ScenarioError(f"no scenario files in {directory}")
    results = []
    for path in files:
        scenario = Scenario.from_file(path)
        results.append(run_scenario(scenario, config, seed=seed, port=0))
    return SuiteResult(results=results)
