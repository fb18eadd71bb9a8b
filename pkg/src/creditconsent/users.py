"""Bureau account store. Credentials exist only as salted scrypt verifiers;
temporary pairs minted by the forgot-password flow expire and are shown once.
"""

from __future__ import annotations

import hashlib
import hmac
import threading
from dataclasses import dataclass

from creditconsent.protocol.types import UserIdentity
from creditconsent.runtime import Clock, Entropy

_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1


def _verifier(password: str, salt: bytes) -> bytes:
    return hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    )


@dataclass
class _UserRecord:
    identity: UserIdentity
    salt: bytes
    verifier: bytes
    expires_at: float | None  # monotonic; temp credentials only


@dataclass(frozen=True)
class TempCredentials:
    username: str
    password: str
    expires_in_s: int


class UserStore:
    def __init__(self, clock: Clock, entropy: Entropy, temp_ttl_s: int = 600):
        self._clock = clock
        self._entropy = entropy
        self._temp_ttl_s = temp_ttl_s
        self._users: dict[str, _UserRecord] = {}
        self._lock = threading.Lock()

    def add_user(self, username: str, password: str, phone: str | None = None) -> None:
        with self._lock:
            if username in self._users:
                raise ValueError(f"username {username!r} already registered")
            salt = self._entropy.token_bytes(16)
            self._users[username] = _UserRecord(
                identity=UserIdentity(username=username, phone=phone),
                salt=salt,
                verifier=_verifier(password, salt),
                expires_at=None,
            )

    def issue_temp_credentials(self, username_hint: str = "") -> TempCredentials:
        """Mint a random short-lived pair for the forgot-password flow."""
        with self._lock:
            username = f"temp_{self._entropy.token_hex(4)}"
            password = self._entropy.token_urlsafe(9)
            salt = self._entropy.token_bytes(16)
            self._users[username] = _UserRecord(
                identity=UserIdentity(username=username, is_temporary=True),
                salt=salt,
                verifier=_verifier(password, salt),
                expires_at=self._clock.monotonic() + self._temp_ttl_s,
            )
            return TempCredentials(
                username=username, password=password, expires_in_s=self._temp_ttl_s
            )

    def authenticate(self, username: str, password: str) -> UserIdentity | None:
        """Verify a credential pair; expired temporary pairs never match."""
        with self._lock:
            record = self._users.get(username)
        if record is None:
            # burn comparable time so unknown usernames are not distinguishable
            _verifier(password, b"\x00" * 16)
            return None
        if record.expires_at is not None and self._clock.monotonic() > record.expires_at:
            return None
        if not hmac.compare_digest(_verifier(password, record.salt), record.verifier):
            return None
        return record.identity

    def get(self, username: str) -> UserIdentity | None:
        with self._lock:
            record = self._users.get(username)
        return record.identity if record else None
