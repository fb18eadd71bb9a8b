"""Notification gateway: SMS authorization links, OTPs, and outcome alerts.

Delivery is best-effort and never blocks or reverts the calling flow; a
failed delivery is recorded with its reason and the flow proceeds. Three
gateways ship built in: memory (test double), console, and file (JSON
lines). Real carrier adapters plug in behind the same Gateway protocol.
"""

from __future__ import annotations

import json
import re
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Protocol

from creditconsent.runtime import Clock, rfc3339


class MessageChannel(str, Enum):
    SMS = "SMS"
    EMAIL = "Email"


class MessageKind(str, Enum):
    AUTHORIZATION_LINK = "AuthorizationLink"
    OTP = "Otp"
    OUTCOME_APPROVED = "OutcomeApproved"
    OUTCOME_DENIED = "OutcomeDenied"


_URI = re.compile(r"https?://\S+")


@dataclass
class OutboundMessage:
    message_id: str
    channel: MessageChannel
    recipient: str
    kind: MessageKind
    body: str
    enqueued_at: datetime
    delivered_at: datetime | None = None
    failed_reason: str | None = None

    @property
    def delivered(self) -> bool:
        return self.delivered_at is not None

    def latency_s(self) -> float | None:
        if self.delivered_at is None:
            return None
        return (self.delivered_at - self.enqueued_at).total_seconds()


@dataclass(frozen=True)
class DeliveryReceipt:
    message_id: str
    delivered: bool
    latency_s: float | None
    failed_reason: str | None = None


class GatewayError(Exception):
    pass


class Gateway(Protocol):
    def deliver(self, message: OutboundMessage) -> datetime:
        """Hand the message to the carrier; returns the delivery timestamp."""
        ...


class MemoryGateway:
    """Delivers instantly; the notifier's own record list is the evidence."""

    def __init__(self, clock: Clock):
        self._clock = clock

    def deliver(self, message: OutboundMessage) -> datetime:
        return self._clock.now()


class ConsoleGateway:
    def __init__(self, clock: Clock):
        self._clock = clock

    def deliver(self, message: OutboundMessage) -> datetime:
        print(f"[{message.channel.value} -> {message.recipient}] {message.body}")
        return self._clock.now()


class FileGateway:
    """Appends one JSON object per delivery, RFC 3339 timestamps."""

    def __init__(self, clock: Clock, path: str | Path):
        self._clock = clock
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)

    def deliver(self, message: OutboundMessage) -> datetime:
        delivered_at = self._clock.now()
        record = {
            "message_id": message.message_id,
            "channel": message.channel.value,
            "recipient": message.recipient,
            "kind": message.kind.value,
            "body": message.body,
            "enqueued_at": rfc3339(message.enqueued_at),
            "delivered_at": rfc3339(delivered_at),
        }
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        return delivered_at


class FailingGateway:
    """Test double: every delivery fails with the configured reason."""

    def __init__(self, reason: str = "carrier unreachable"):
        self.reason = reason

    def deliver(self, message: OutboundMessage) -> datetime:
        raise GatewayError(self.reason)


def authorization_link_body(request_uri: str, ttl_s: int) -> str:
    return f"Approve your credit inquiry: {request_uri} (expires in {ttl_s}s)"


class Notifier:
    def __init__(self, gateway: Gateway, clock: Clock):
        self._gateway = gateway
        self._clock = clock
        self._messages: list[OutboundMessage] = []
        self._lock = threading.Lock()

    def send(
        self,
        channel: MessageChannel,
        recipient: str,
        kind: MessageKind,
        body: str,
    ) -> DeliveryReceipt:
        """Record and dispatch one message. Gateway failures are recorded,
        not raised: notification must never gate an authorization flow."""
        if not recipient:
            raise ValueError("recipient must be non-empty")
        if kind is MessageKind.AUTHORIZATION_LINK and len(_URI.findall(body)) != 1:
            raise ValueError("authorization link body must contain exactly one URI")
        message = OutboundMessage(
            message_id=uuid.uuid4().hex,
            channel=channel,
            recipient=recipient,
            kind=kind,
            body=body,
            enqueued_at=self._clock.now(),
        )
        try:
            message.delivered_at = self._gateway.deliver(message)
        except GatewayError as exc:
            message.failed_reason = str(exc)
        with self._lock:
            self._messages.append(message)
        return DeliveryReceipt(
            message_id=message.message_id,
            delivered=message.delivered,
            latency_s=message.latency_s(),
            failed_reason=message.failed_reason,
        )

    def list_deliveries(
        self,
        kind: MessageKind | None = None,
        channel: MessageChannel | None = None,
        recipient: str | None = None,
    ) -> list[OutboundMessage]:
        with self._lock:
            msgs = list(self._messages)
        msgs.sort(key=lambda m: m.enqueued_at)
        if kind is not None:
            msgs = [m for m in msgs if m.kind is kind]
        if channel is not None:
            msgs = [m for m in msgs if m.channel is channel]
        if recipient is not None:
            msgs = [m for m in msgs if m.recipient == recipient]
        return msgs


def build_gateway(name: str, clock: Clock, file_path: str | Path) -> Gateway:
    if name == "memory":
        return MemoryGateway(clock)
    if name == "console":
        return ConsoleGateway(clock)
    if name == "file":
        return FileGateway(clock, file_path)
    raise ValueError(f"unknown gateway {name!r}")
