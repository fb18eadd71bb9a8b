"""PKCE (S256 only): verifier generation, challenge derivation, verification.

"plain" is rejected outright; it adds interception surface for nothing.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import re
from dataclasses import dataclass

from creditconsent.runtime import Entropy

_UNRESERVED = re.compile(r"^[A-Za-z0-9\-._~]+$")
_B64URL = re.compile(r"^[A-Za-z0-9\-_]+$")

CHALLENGE_METHOD = "S256"


@dataclass(frozen=True)
class PkceVerifier:
    """Client-held secret: 43-128 chars from the unreserved URI set."""

    value: str

    def __post_init__(self) -> None:
        if not 43 <= len(self.value) <= 128:
            raise ValueError(f"verifier length {len(self.value)} outside [43,128]")
        if not _UNRESERVED.match(self.value):
            raise ValueError("verifier contains characters outside [A-Za-z0-9-._~]")


@dataclass(frozen=True)
class PkceChallenge:
    """base64url (no padding) SHA-256 commitment to a verifier."""

    value: str
    method: str = CHALLENGE_METHOD

    def __post_init__(self) -> None:
        if not _B64URL.match(self.value or ""):
            raise ValueError("challenge is not base64url")
        pad = "=" * (-len(self.value) % 4)
        if len(base64.urlsafe_b64decode(self.value + pad)) != 32:
            raise ValueError("challenge must decode to exactly 32 bytes")


def generate_verifier(entropy: Entropy) -> PkceVerifier:
    """Mint a fresh 43-char verifier carrying 256 bits of entropy."""
    raw = entropy.token_bytes(32)
    return PkceVerifier(base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii"))


def derive_challenge(verifier: PkceVerifier) -> PkceChallenge:
    digest = hashlib.sha256(verifier.value.encode("ascii")).digest()
    value = base64.urlsafe_b64encode(digest).rstrip(b"=").decode("ascii")
    return PkceChallenge(value=value)


def verify_challenge(verifier: PkceVerifier, challenge: PkceChallenge) -> bool:
    """True iff the verifier hashes to the committed challenge.

    Comparison is constant-time. Any malformation or unsupported method
    verifies false rather than raising: the token endpoint treats all of
    these as the same invalid_grant, only the log reason differs.
    """
    if challenge.method != CHALLENGE_METHOD:
        return False
    expected = derive_challenge(verifier)
    return hmac.compare_digest(expected.value.encode(), challenge.value.encode())
