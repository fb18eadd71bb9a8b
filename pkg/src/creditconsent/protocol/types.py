"""Domain types shared across the bank, bureau, and notifier."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from urllib.parse import urlparse


class Scope(str, Enum):
    EMAIL = "email"
    CREDIT_SCORE = "credit_score"
    FULL_REPORT = "full_report"

    @classmethod
    def parse_set(cls, joined: str) -> frozenset["Scope"]:
        """Parse a space-joined scope string; unknown names raise ValueError."""
        names = [s for s in joined.split(" ") if s]
        if not names:
            raise ValueError("scope must be non-empty")
        return frozenset(cls(name) for name in names)

    @staticmethod
    def join(scopes: frozenset["Scope"]) -> str:
        """Space-join in declaration order so wire forms are deterministic."""
        order = list(Scope)
        return " ".join(s.value for s in sorted(scopes, key=order.index))


class Channel(str, Enum):
    ONLINE = "online"
    BRANCH = "branch"


class Decision(str, Enum):
    APPROVED = "Approved"
    DENIED = "Denied"


_E164 = re.compile(r"^\+[1-9]\d{6,14}$")


def valid_phone(phone: str) -> bool:
    return bool(_E164.match(phone))


@dataclass(frozen=True)
class InquiryRequest:
    """One credit inquiry as submitted by the bank, online or in-branch."""

    request_id: str
    channel: Channel
    client_id: str
    redirect_uri: str
    scope: frozenset[Scope]
    subject_hint: str

    def __post_init__(self) -> None:
        parsed = urlparse(self.redirect_uri)
        if not (parsed.scheme and parsed.netloc):
            raise ValueError(f"redirect_uri must be absolute: {self.redirect_uri!r}")
        if not self.scope:
            raise ValueError("scope must be non-empty")


@dataclass(frozen=True)
class UserIdentity:
    """A bureau account holder. The credential verifier lives in the user
    store, never on this object."""

    username: str
    phone: str | None = None
    is_temporary: bool = False


@dataclass(frozen=True)
class ConsentDecision:
    decision: Decision
    decided_at: datetime
    scope_shown: frozenset[Scope]
