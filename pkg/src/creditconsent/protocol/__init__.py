"""Pure protocol logic: PKCE math, flow state machine, credential issuance.

No I/O lives here. Services layer HTTP, auditing, and notification on top.
"""

from creditconsent.protocol.types import (
    Channel,
    ConsentDecision,
    Decision,
    InquiryRequest,
    Scope,
    UserIdentity,
)
from creditconsent.protocol.pkce import (
    PkceChallenge,
    PkceVerifier,
    derive_challenge,
    generate_verifier,
    verify_challenge,
)
from creditconsent.protocol.session import (
    FlowEvent,
    FlowSession,
    Phase,
    ProtocolViolation,
    StateToken,
    transition,
)
from creditconsent.protocol.issuance import (
    AccessToken,
    ArtifactCode,
    ArtifactError,
    AuthorizationCode,
    InvalidGrant,
    Issuer,
    TokenValidation,
)

__all__ = [
    "AccessToken",
    "ArtifactCode",
    "ArtifactError",
    "AuthorizationCode",
    "Channel",
    "ConsentDecision",
    "Decision",
    "FlowEvent",
    "FlowSession",
    "InquiryRequest",
    "InvalidGrant",
    "Issuer",
    "Phase",
    "PkceChallenge",
    "PkceVerifier",
    "ProtocolViolation",
    "Scope",
    "StateToken",
    "TokenValidation",
    "UserIdentity",
    "derive_challenge",
    "generate_verifier",
    "transition",
    "verify_challenge",
]
