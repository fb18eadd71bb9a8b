"""Injectable clock and entropy sources.

TTL arithmetic runs on a monotonic clock so expiry tests can fast-forward
deterministically; wall-clock time is only used for display and audit
timestamps. Opaque credentials come from the OS CSPRNG by default; the
seeded source exists solely so the harness can replay bit-identical
transcripts and must never back a production deployment.
"""

from __future__ import annotations

import random
import secrets
import time
from datetime import datetime, timezone
from typing import Protocol


class Clock(Protocol):
    def monotonic(self) -> float: ...

    def now(self) -> datetime: ...


class SystemClock:
    """Real time: time.monotonic for TTLs, UTC wall clock for display."""

    def monotonic(self) -> float:
        return time.monotonic()

    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class ManualClock:
    """Test clock that only moves when advanced."""

    def __init__(self, start: float = 1000.0, wall: datetime | None = None):
        self._mono = start
        self._wall = wall or datetime(2025, 4, 9, 22, 38, 8, tzinfo=timezone.utc)

    def monotonic(self) -> float:
        return self._mono

    def now(self) -> datetime:
        return self._wall

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("clock cannot go backwards")
        self._mono += seconds
        self._wall = datetime.fromtimestamp(
            self._wall.timestamp() + seconds, tz=timezone.utc
        )


class Entropy(Protocol):
    def token_bytes(self, n: int) -> bytes: ...

    def token_hex(self, n: int) -> str: ...

    def token_urlsafe(self, n: int) -> str: ...

    def digits(self, n: int) -> str: ...


class SystemEntropy:
    """CSPRNG-backed source for all opaque credentials."""

    def token_bytes(self, n: int) -> bytes:
        return secrets.token_bytes(n)

    def token_hex(self, n: int) -> str:
        return secrets.token_hex(n)

    def token_urlsafe(self, n: int) -> str:
        return secrets.token_urlsafe(n)

    def digits(self, n: int) -> str:
        return "".join(str(secrets.randbelow(10)) for _ in range(n))


class SeededEntropy:
    """Deterministic source for reproducible harness transcripts.

    NOT cryptographically secure; never use outside demos and tests.
    """

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def token_bytes(self, n: int) -> bytes:
        return self._rng.randbytes(n)

    def token_hex(self, n: int) -> str:
        return self.token_bytes(n).hex()

    def token_urlsafe(self, n: int) -> str:
        import base64

        return base64.urlsafe_b64encode(self.token_bytes(n)).rstrip(b"=").decode()

    def digits(self, n: int) -> str:
        return "".join(str(self._rng.randrange(10)) for _ in range(n))


def make_entropy(seed: int | None) -> Entropy:
    return SystemEntropy() if seed is None else SeededEntropy(seed)


def rfc3339(dt: datetime) -> str:
    """RFC 3339 UTC timestamp with microseconds, Z suffix."""
    return dt.astimezone(timezone.utc).isoformat(timespec="microseconds").replace(
        "+00:00", "Z"
    )
