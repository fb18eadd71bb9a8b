"""Operations CLI: scenario runs, suites, the standalone server, and audit
log verification and querying."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from creditconsent.audit import EventKind, load_events, verify_file
from creditconsent.protocol.types import Decision
from creditconsent.config import AppConfig
from creditconsent.harness import (
    ScenarioError,
    builtin_scenario_dir,
    load_scenario,
    run_scenario,
    run_suite,
)


def _load_config(path: str | None) -> AppConfig:
    return AppConfig.from_file(path) if path else AppConfig()


@click.group()
def main() -> None:
    """Consent-gated credit inquiry simulator."""


@main.command()
@click.option("--scenario", "scenario_ref", required=True,
              help="Scenario file path or builtin name (e.g. approve-online).")
@click.option("--seed", type=int, default=None,
              help="Seed the entropy source for a reproducible transcript.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--base-url", default=None,
              help="Drive an already-running stack instead of booting one.")
@click.option("--metrics-out", type=click.Path(), default=None)
@click.option("--audit-out", type=click.Path(), default=None,
              help="Audit log file for the run (all-in-one mode).")
def run(scenario_ref, seed, config_path, base_url, metrics_out, audit_out):
    """Run one scenario and print its transcript."""
    try:
        scenario = load_scenario(scenario_ref)
        result = run_scenario(
            scenario,
            _load_config(config_path),
            seed=seed,
            base_url=base_url,
            audit_path=audit_out,
        )
    except ScenarioError as exc:
        raise click.ClickException(str(exc))
    click.echo(result.transcript)
    if metrics_out:
        Path(metrics_out).write_text(json.dumps(result.metrics.to_dict(), indent=2))
    if result.ok:
        click.echo(f"scenario {result.name}: PASS (terminal {result.terminal})")
    else:
        click.echo(
            f"scenario {result.name}: FAIL "
            f"(terminal {result.terminal}, expected {result.expected_terminal})",
            err=True,
        )
        sys.exit(1)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False),
                required=False)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
def suite(directory, config_path, seed):
    """Run every scenario in DIRECTORY (default: the builtin set)."""
    target = Path(directory) if directory else builtin_scenario_dir()
    try:
        outcome = run_suite(target, _load_config(config_path), seed=seed)
    except ScenarioError as exc:
        raise click.ClickException(str(exc))
    width = max(len(r.name) for r in outcome.results)
    for r in outcome.results:
        flag = "PASS" if r.ok else "FAIL"
        wall = f"{r.metrics.wall_time_ms:8.1f} ms" if r.metrics.wall_time_ms else ""
        click.echo(f"{r.name:<{width}}  {flag}  terminal={r.terminal:<10} {wall}")
    denials = [
        r.metrics.denial_termination_ms
        for r in outcome.results
        if r.metrics.denial_termination_ms is not None
    ]
    if denials:
        click.echo(f"denial termination: max {max(denials):.1f} ms")
    notify = [
        r.metrics.notification_latency_ms
        for r in outcome.results
        if r.metrics.notification_latency_ms is not None
    ]
    if notify:
        click.echo(f"notification latency: max {max(notify):.1f} ms")
    if not outcome.ok:
        failing = ", ".join(r.name for r in outcome.results if not r.ok)
        click.echo(f"failing: {failing}", err=True)
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--audit-out", type=click.Path(), default=None)
def serve(config_path, port, audit_out):
    """Boot the all-in-one stack and serve until interrupted."""
    from creditconsent.stack import ServiceStack

    config = _load_config(config_path)
    stack = ServiceStack(config, port=port, audit_path=audit_out)
    stack.start()
    click.echo(f"serving on {stack.base_url}")
    click.echo(f"start a flow: {stack.base_url}/client/start")
    try:
        import time

        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        stack.stop()


@main.group()
def audit() -> None:
    """Inspect hash-chained audit logs."""


@audit.command("verify")
@click.argument("logfile", type=click.Path(exists=True, dir_okay=False))
def audit_verify(logfile):
    """Recompute the hash chain of LOGFILE."""
    result = verify_file(logfile)
    if result.ok:
        click.echo("ok")
    else:
        click.echo(f"chain broken at seq {result.first_bad_seq}", err=True)
        sys.exit(1)


@audit.command("query")
@click.argument("logfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice([k.value for k in EventKind]), default=None)
@click.option("--decision", type=click.Choice([d.value for d in Decision]), default=None)
@click.option("--since", default=None, help="RFC 3339 lower bound (inclusive).")
@click.option("--until", default=None, help="RFC 3339 upper bound (inclusive).")
def audit_query(logfile, kind, decision, since, until):
    """Print matching events from LOGFILE as JSON lines."""
    for event in load_events(logfile):
        if kind and event.event_kind != kind:
            continue
        if decision and event.decision != decision:
            continue
        if since and event.timestamp < since:
            continue
        if until and event.timestamp > until:
            continue
        click.echo(event.to_json_line())


if __name__ == "__main__":
    main()
