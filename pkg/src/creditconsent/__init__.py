"""Consent-gated credit inquiry authorization.

A bank client, a credit bureau authorization server, and a protected
credit-report API, tied together by the OAuth 2.0 authorization code flow
with PKCE. Every inquiry requires an explicit real-time approve/deny from
the customer, online via the bank portal or offline via an SMS'd single-use
authorization link. All authorization events land in a hash-chained audit
log. A scenario harness drives complete flows and emits PoC-style
transcripts with latency metrics.
"""

__version__ = "0.1.0"
