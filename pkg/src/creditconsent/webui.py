"""Server-rendered mobile-styled pages for the human approval loop.

Forms and redirects only; every page works without scripting. The optional
consent-ui bundle (served from /static when built) progressively enhances
these pages but never carries state of its own.
"""

from __future__ import annotations

import html

from creditconsent.protocol.types import Scope
from creditconsent.users import TempCredentials

SCOPE_DESCRIPTIONS = {
    Scope.EMAIL: "Your email address",
    Scope.CREDIT_SCORE: "Your credit score",
    Scope.FULL_REPORT: "Your full credit report",
}

_STYLE = """
* { margin: 0; padding: 0; box-sizing: border-box; }
body { font-family: -apple-system, 'Segoe UI', Roboto, sans-serif;
       background: #eef1f5; color: #1c2330; display: flex;
       justify-content: center; padding: 2.5rem 1rem; }
.card { background: #fff; border-radius: 14px; width: 100%; max-width: 380px;
        padding: 1.8rem 1.5rem; box-shadow: 0 6px 24px rgba(20,30,60,.08); }
h1 { font-size: 1.15rem; margin-bottom: .4rem; }
p  { font-size: .9rem; color: #4a5568; margin-bottom: 1rem; line-height: 1.45; }
form { display: flex; flex-direction: column; gap: .7rem; }
label { font-size: .78rem; color: #718096; }
input { padding: .6rem .7rem; border: 1px solid #cbd5e0; border-radius: 8px;
        font-size: .95rem; width: 100%; }
button { padding: .65rem; border: 0; border-radius: 8px; font-size: .95rem;
         cursor: pointer; }
.primary { background: #2b6cb0; color: #fff; }
.danger  { background: #e2e8f0; color: #742a2a; }
.scopes { list-style: none; margin: .6rem 0 1rem; }
.scopes li { padding: .5rem .6rem; background: #f7fafc; border: 1px solid #e2e8f0;
             border-radius: 8px; margin-bottom: .4rem; font-size: .88rem; }
.alert { background: #fff5f5; border: 1px solid #feb2b2; color: #742a2a;
         padding: .55rem .7rem; border-radius: 8px; font-size: .85rem;
         margin-bottom: .8rem; }
.note  { background: #ebf8ff; border: 1px solid #90cdf4; color: #2a4365;
         padding: .55rem .7rem; border-radius: 8px; font-size: .85rem; }
.mono { font-family: ui-monospace, 'SF Mono', Menlo, monospace; }
a { color: #2b6cb0; font-size: .85rem; }
.row { display: flex; gap: .6rem; }
.row form { flex: 1; }
"""


def _page(title: str, body: str, page_kind: str) -> str:
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=device-width, initial-scale=1.0">
<title>{html.escape(title)}</title>
<style>{_STYLE}</style>
</head>
<body data-page="{page_kind}">
<div class="card">
{body}
</div>
<script type="module" src="/static/consent-ui.js"></script>
</body>
</html>"""


def login_page(
    session_id: str,
    error: str | None = None,
    attempts_remaining: int | None = None,
) -> str:
    alert = ""
    if error:
        hint = (
            f" ({attempts_remaining} attempts remaining)"
            if attempts_remaining is not None
            else ""
        )
        alert = f'<div class="alert" id="login-error">{html.escape(error)}{hint}</div>'
    body = f"""<h1>Credit Bureau Sign In</h1>
<p>Sign in to review the credit inquiry request.</p>
{alert}
<form method="post" action="/login" id="login-form">
  <input type="hidden" name="session" value="{html.escape(session_id)}">
  <label for="username">Username</label>
  <input id="username" name="username" autocomplete="username" required autofocus>
  <label for="password">Password</label>
  <input id="password" name="password" type="password"
         autocomplete="current-password" required>
  <button type="submit" class="primary">Sign in</button>
</form>
<form method="post" action="/forgot" style="margin-top:.8rem">
  <input type="hidden" name="session" value="{html.escape(session_id)}">
  <button type="submit" style="background:none;color:#2b6cb0;text-align:left;
          padding:0;font-size:.85rem" id="forgot-link">Forgot password?</button>
</form>"""
    return _page("Sign in", body, "login")


def forgot_page(session_id: str, temp: TempCredentials) -> str:
    body = f"""<h1>Temporary Credentials</h1>
<p>Use this one-time pair to sign in. It expires in {temp.expires_in_s} seconds
and is shown only once.</p>
<div class="note">
  Username: <span class="mono" id="temp-username">{html.escape(temp.username)}</span><br>
  Password: <span class="mono" id="temp-password">{html.escape(temp.password)}</span>
</div>
<p style="margin-top:1rem">
<a href="/login?session={html.escape(session_id)}" id="back-to-login">Back to sign in</a>
</p>"""
    return _page("Temporary credentials", body, "forgot")


def otp_page(
    session_id: str,
    error: str | None = None,
    attempts_remaining: int | None = None,
) -> str:
    alert = ""
    if error:
        hint = (
            f" ({attempts_remaining} attempts remaining)"
            if attempts_remaining is not None
            else ""
        )
        alert = f'<div class="alert" id="otp-error">{html.escape(error)}{hint}</div>'
    body = f"""<h1>Verification Code</h1>
<p>Enter the 6-digit code we sent to your phone.</p>
{alert}
<form method="post" action="/mfa" id="otp-form">
  <input type="hidden" name="session" value="{html.escape(session_id)}">
  <label for="otp">One-time code</label>
  <input id="otp" name="otp" inputmode="numeric" pattern="[0-9]{{6}}"
         maxlength="6" required autofocus>
  <button type="submit" class="primary">Verify</button>
</form>"""
    return _page("Verification code", body, "otp")


def consent_page(
    session_id: str,
    client_name: str,
    scopes: list[Scope],
    subject_hint: str,
) -> str:
    items = "".join(
        f"<li>{html.escape(SCOPE_DESCRIPTIONS[s])}</li>" for s in scopes
    )
    body = f"""<h1>Authorization Request</h1>
<p><strong>{html.escape(client_name)}</strong> is requesting access to the
credit record of <strong>{html.escape(subject_hint)}</strong>:</p>
<ul class="scopes" id="scope-list">{items}</ul>
<p>Approve only if you initiated this request.</p>
<div class="row">
  <form method="post" action="/consent" id="approve-form">
    <input type="hidden" name="session" value="{html.escape(session_id)}">
    <input type="hidden" name="decision" value="approve">
    <button type="submit" class="primary" id="approve-button">Approve</button>
  </form>
  <form method="post" action="/consent" id="deny-form">
    <input type="hidden" name="session" value="{html.escape(session_id)}">
    <input type="hidden" name="decision" value="deny">
    <button type="submit" class="danger" id="deny-button">Deny</button>
  </form>
</div>"""
    return _page("Review request", body, "consent")


def denial_page(return_url: str) -> str:
    body = f"""<h1>Request Denied</h1>
<p>The credit inquiry was blocked. No data was shared with the requester,
and the attempt has been recorded.</p>
<p><a href="{html.escape(return_url, quote=True)}" id="return-link">Return to the bank portal</a></p>"""
    return _page("Request denied", body, "denial")


def error_page(title: str, message: str, page_kind: str = "error") -> str:
    body = f"""<h1>{html.escape(title)}</h1>
<p>{html.escape(message)}</p>"""
    return _page(title, body, page_kind)
