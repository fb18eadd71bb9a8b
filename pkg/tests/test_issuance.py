"""Code, token, and artifact lifecycle: bindings, single use, expiry,
redemption races, and scope confinement."""

import threading
from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from creditconsent.protocol import (
    ArtifactError,
    Channel,
    ConsentDecision,
    Decision,
    FlowEvent,
    FlowSession,
    InquiryRequest,
    InvalidGrant,
    Issuer,
    Phase,
    PkceVerifier,
    ProtocolViolation,
    Scope,
    StateToken,
    derive_challenge,
    generate_verifier,
    transition,
)
from creditconsent.runtime import ManualClock, SystemEntropy


class DictSessions:
    def __init__(self):
        self.by_id = {}

    def add(self, session):
        self.by_id[session.session_id] = session

    def get(self, session_id):
        return self.by_id.get(session_id)


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def sessions():
    return DictSessions()


@pytest.fixture
def issuer(sessions, clock):
    return Issuer(sessions, SystemEntropy(), clock,
                  code_ttl_s=60, token_ttl_s=600, artifact_ttl_s=300)


def make_session(
    sessions,
    clock,
    sid="s1",
    channel=Channel.ONLINE,
    scope=frozenset({Scope.EMAIL, Scope.CREDIT_SCORE}),
    phase=Phase.APPROVED,
):
    verifier = generate_verifier(SystemEntropy())
    request = InquiryRequest(
        request_id=f"req-{sid}",
        channel=channel,
        client_id="bank-portal",
        redirect_uri="http://127.0.0.1:5055/client/callback",
        scope=scope,
        subject_hint="John Doe",
    )
    session = FlowSession(
        session_id=sid,
        request=request,
        challenge=derive_challenge(verifier),
        state=StateToken("ab" * 12),
    )
    if phase is Phase.APPROVED:
        transition(session, FlowEvent.AUTHENTICATED, clock)
        transition(session, FlowEvent.CONSENT_SHOWN, clock)
        transition(session, FlowEvent.APPROVED, clock)
        session.consent = ConsentDecision(
            decision=Decision.APPROVED, decided_at=clock.now(), scope_shown=scope
        )
    sessions.add(session)
    return session, verifier


# -- issue_code ---------------------------------------------------------------


def test_issue_code_binds_session_material(issuer, sessions, clock):
    session, _ = make_session(sessions, clock)
    code = issuer.issue_code(session)
    assert code.bound_challenge == session.challenge
    assert code.bound_client_id == "bank-portal"
    assert code.bound_redirect_uri == session.request.redirect_uri
    assert not code.redeemed
    assert len(code.code) >= 8 and int(code.code, 16) is not None
    assert session.phase is Phase.CODE_ISSUED


def test_issue_code_requires_approved_phase(issuer, sessions, clock):
    session, _ = make_session(sessions, clock, phase=Phase.INITIATED)
    with pytest.raises(ProtocolViolation):
        issuer.issue_code(session)


def test_distinct_sessions_get_distinct_codes(issuer, sessions, clock):
    s1, _ = make_session(sessions, clock, sid="s1")
    s2, _ = make_session(sessions, clock, sid="s2")
    assert issuer.issue_code(s1).code != issuer.issue_code(s2).code


# -- redeem_code ---------------------------------------------------------------


def test_redeem_happy_path(issuer, sessions, clock):
    session, verifier = make_session(sessions, clock)
    code = issuer.issue_code(session)
    token = issuer.redeem_code(
        code.code, verifier, "bank-portal", session.request.redirect_uri
    )
    assert len(token.token) >= 32  # 128 bits as hex
    assert token.scope == session.consent.scope_shown
    assert session.phase is Phase.TOKEN_ISSUED


def test_replay_rejected(issuer, sessions, clock):
    session, verifier = make_session(sessions, clock)
    code = issuer.issue_code(session)
    issuer.redeem_code(code.code, verifier, "bank-portal", session.request.redirect_uri)
    with pytest.raises(InvalidGrant) as err:
        issuer.redeem_code(
            code.code, verifier, "bank-portal", session.request.redirect_uri
        )
    assert err.value.reason == "code_already_redeemed"


def test_redeem_at_ttl_plus_one_second_rejected(issuer, sessions, clock):
    session, verifier = make_session(sessions, clock)
    code = issuer.issue_code(session)
    clock.advance(61)
    with pytest.raises(InvalidGrant) as err:
        issuer.redeem_code(
            code.code, verifier, "bank-portal", session.request.redirect_uri
        )
    assert err.value.reason == "code_expired"


def test_redeem_at_exact_ttl_still_valid(issuer, sessions, clock):
    session, verifier = make_session(sessions, clock)
    code = issuer.issue_code(session)
    clock.advance(60)
    token = issuer.redeem_code(
        code.code, verifier, "bank-portal", session.request.redirect_uri
    )
    assert token.token


@pytest.mark.parametrize(
    "client_id,redirect,reason",
    [
        ("other-bank", None, "client_mismatch"),
        (None, "http://evil.example/cb", "redirect_mismatch"),
    ],
)
def test_binding_mismatches(issuer, sessions, clock, client_id, redirect, reason):
    session, verifier = make_session(sessions, clock)
    code = issuer.issue_code(session)
    with pytest.raises(InvalidGrant) as err:
        issuer.redeem_code(
            code.code,
            verifier,
            client_id or "bank-portal",
            redirect or session.request.redirect_uri,
        )
    assert err.value.reason == reason


def test_wrong_verifier_rejected_and_code_survives(issuer, sessions, clock):
    session, verifier = make_session(sessions, clock)
    code = issuer.issue_code(session)
    with pytest.raises(InvalidGrant) as err:
        issuer.redeem_code(
            code.code,
            generate_verifier(SystemEntropy()),
            "bank-portal",
            session.request.redirect_uri,
        )
    assert err.value.reason == "pkce_mismatch"
    # a failed PKCE attempt does not burn the code for the honest client
    token = issuer.redeem_code(
        code.code, verifier, "bank-portal", session.request.redirect_uri
    )
    assert token.token


def test_unknown_code(issuer):
    with pytest.raises(InvalidGrant) as err:
        issuer.redeem_code(
            "deadbeef" * 2,
            generate_verifier(SystemEntropy()),
            "bank-portal",
            "http://127.0.0.1:5055/client/callback",
        )
    assert err.value.reason == "unknown_code"


def test_concurrent_redemptions_exactly_one_wins(issuer, sessions, clock):
    session, verifier = make_session(sessions, clock)
    code = issuer.issue_code(session)
    barrier = threading.Barrier(16)
    outcomes = []

    def attempt():
        barrier.wait()
        try:
            issuer.redeem_code(
                code.code, verifier, "bank-portal", session.request.redirect_uri
            )
            return "ok"
        except InvalidGrant as exc:
            return exc.reason

    with ThreadPoolExecutor(max_workers=16) as pool:
        outcomes = list(pool.map(lambda _: attempt(), range(16)))
    assert outcomes.count("ok") == 1
    assert outcomes.count("code_already_redeemed") == 15


# -- validate_token --------------------------------------------------------------


def obtain_token(issuer, sessions, clock, scope=frozenset({Scope.CREDIT_SCORE})):
    session, verifier = make_session(sessions, clock, scope=scope)
    code = issuer.issue_code(session)
    return issuer.redeem_code(
        code.code, verifier, "bank-portal", session.request.redirect_uri
    )


def test_validate_fresh_token(issuer, sessions, clock):
    token = obtain_token(issuer, sessions, clock)
    result = issuer.validate_token(token.token, Scope.CREDIT_SCORE)
    assert result.valid and result.session_id == token.session_id


def test_validate_expired_token(issuer, sessions, clock):
    token = obtain_token(issuer, sessions, clock)
    clock.advance(601)
    result = issuer.validate_token(token.token, Scope.CREDIT_SCORE)
    assert not result.valid and result.reason == "expired"


def test_validate_insufficient_scope(issuer, sessions, clock):
    token = obtain_token(issuer, sessions, clock, scope=frozenset({Scope.EMAIL}))
    result = issuer.validate_token(token.token, Scope.CREDIT_SCORE)
    assert not result.valid and result.reason == "insufficient_scope"


def test_validate_revoked_token(issuer, sessions, clock):
    token = obtain_token(issuer, sessions, clock)
    issuer.revoke_token(token.token)
    result = issuer.validate_token(token.token, Scope.CREDIT_SCORE)
    assert not result.valid and result.reason == "revoked"


def test_validate_unknown_token(issuer):
    result = issuer.validate_token("f" * 32, Scope.CREDIT_SCORE)
    assert not result.valid and result.reason == "unknown"


@given(st.integers(min_value=0, max_value=600))
@settings(max_examples=100)
def test_ttl_monotonicity(t):
    """Valid at t implies valid at every earlier instant; once expired,
    never valid again."""
    clock = ManualClock()
    sessions = DictSessions()
    issuer = Issuer(sessions, SystemEntropy(), clock, token_ttl_s=600)
    token = obtain_token(issuer, sessions, clock)
    clock.advance(t)
    assert issuer.validate_token(token.token, Scope.CREDIT_SCORE).valid
    clock.advance(601 - t)
    assert not issuer.validate_token(token.token, Scope.CREDIT_SCORE).valid


def test_scope_confinement(issuer, sessions, clock):
    for i, scope in enumerate(
        [frozenset({Scope.EMAIL}), frozenset({Scope.EMAIL, Scope.CREDIT_SCORE})]
    ):
        session, verifier = make_session(sessions, clock, sid=f"sc{i}", scope=scope)
        code = issuer.issue_code(session)
        token = issuer.redeem_code(
            code.code, verifier, "bank-portal", session.request.redirect_uri
        )
        assert token.scope <= session.consent.scope_shown


# -- artifacts -------------------------------------------------------------------


def make_branch_session(sessions, clock, sid="b1"):
    session, verifier = make_session(
        sessions, clock, sid=sid, channel=Channel.BRANCH, phase=Phase.INITIATED
    )
    return session, verifier


def test_issue_artifact(issuer, sessions, clock):
    session, _ = make_branch_session(sessions, clock)
    artifact = issuer.issue_artifact(session, "http://127.0.0.1:5055")
    assert artifact.request_uri == f"http://127.0.0.1:5055/a/{artifact.artifact}"
    assert artifact.ttl_seconds == 300


def test_artifact_rejects_online_channel(issuer, sessions, clock):
    session, _ = make_session(sessions, clock, phase=Phase.INITIATED)
    with pytest.raises(ProtocolViolation):
        issuer.issue_artifact(session, "http://127.0.0.1:5055")


def test_artifact_rejects_wrong_phase(issuer, sessions, clock):
    session, _ = make_session(sessions, clock, channel=Channel.BRANCH)
    with pytest.raises(ProtocolViolation):
        issuer.issue_artifact(session, "http://127.0.0.1:5055")


def test_artifacts_distinct(issuer, sessions, clock):
    s1, _ = make_branch_session(sessions, clock, sid="b1")
    s2, _ = make_branch_session(sessions, clock, sid="b2")
    a1 = issuer.issue_artifact(s1, "http://x")
    a2 = issuer.issue_artifact(s2, "http://x")
    assert a1.artifact != a2.artifact


def test_artifact_redeem_within_ttl(issuer, sessions, clock):
    session, _ = make_branch_session(sessions, clock)
    artifact = issuer.issue_artifact(session, "http://x")
    clock.advance(100)
    assert issuer.redeem_artifact(artifact.artifact) is session


def test_artifact_expired(issuer, sessions, clock):
    session, _ = make_branch_session(sessions, clock)
    artifact = issuer.issue_artifact(session, "http://x")
    clock.advance(301)
    with pytest.raises(ArtifactError) as err:
        issuer.redeem_artifact(artifact.artifact)
    assert err.value.reason == "link_expired"


def test_artifact_reused(issuer, sessions, clock):
    session, _ = make_branch_session(sessions, clock)
    artifact = issuer.issue_artifact(session, "http://x")
    issuer.redeem_artifact(artifact.artifact)
    with pytest.raises(ArtifactError) as err:
        issuer.redeem_artifact(artifact.artifact)
    assert err.value.reason == "link_used"


def test_artifact_unknown(issuer):
    with pytest.raises(ArtifactError) as err:
        issuer.redeem_artifact("0" * 32)
    assert err.value.reason == "not_found"


def test_concurrent_artifact_redemptions_exactly_one_wins(issuer, sessions, clock):
    session, _ = make_branch_session(sessions, clock)
    artifact = issuer.issue_artifact(session, "http://x")
    barrier = threading.Barrier(16)

    def attempt(_):
        barrier.wait()
        try:
            issuer.redeem_artifact(artifact.artifact)
            return "ok"
        except ArtifactError as exc:
            return exc.reason

    with ThreadPoolExecutor(max_workers=16) as pool:
        outcomes = list(pool.map(attempt, range(16)))
    assert outcomes.count("ok") == 1
    assert outcomes.count("link_used") == 15
