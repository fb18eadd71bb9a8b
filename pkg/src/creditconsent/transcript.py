"""Run transcript in the PoC console style: timestamped protocol lines plus
raw report blocks. Content (everything after the timestamp) is deterministic
under a seeded entropy source."""

from __future__ import annotations

import re
import threading

from creditconsent.runtime import Clock

_TS_PREFIX = re.compile(r"^\[[^\]]*\] ")


class Transcript:
    def __init__(self, clock: Clock):
        self._clock = clock
        self._lines: list[str] = []
        self._lock = threading.Lock()

    def log(self, text: str) -> None:
        stamp = self._clock.now().strftime("%Y-%m-%d %H:%M:%S")
        with self._lock:
            self._lines.append(f"[{stamp}] {text}")

    def raw(self, text: str) -> None:
        with self._lock:
            self._lines.append(text)

    def lines(self) -> list[str]:
        with self._lock:
            return list(self._lines)

    def text(self) -> str:
        return "\n".join(self.lines())

    def content_lines(self) -> list[str]:
        """Lines with timestamps stripped, for bit-identical comparison of
        seeded runs."""
        return [_TS_PREFIX.sub("", line) for line in self.lines()]
