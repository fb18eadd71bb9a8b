"""Runtime configuration.

Every constant the protocol leaves open (lifetimes, retry budgets, rate
limits) lives here with its conventional short-lived default, and can be
overridden from a JSON config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class AppConfig:
    port: int = 5055
    ttl_auth_code_s: int = 60
    ttl_token_s: int = 600
    ttl_artifact_s: int = 300
    otp_ttl_s: int = 120
    rate_capacity: int = 5
    rate_refill_per_min: float = 5.0
    mfa_enabled: bool = False
    gateway: str = "memory"  # memory | console | file
    gateway_file: str = "deliveries.jsonl"  # used when gateway == "file"

    ttl_temp_credential_s: int = 600
    login_max_failures: int = 5
    otp_max_attempts: int = 3
    pending_flow_ttl_s: int = 900

    bank_client_id: str = "bank-portal"
    bank_client_secret: str = "branch-back-channel-secret"
    bank_display_name: str = "First Demo Bank"

    @classmethod
    def from_file(cls, path: str | Path) -> "AppConfig":
        raw = json.loads(Path(path).read_text())
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "AppConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)
