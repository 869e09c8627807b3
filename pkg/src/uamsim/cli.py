"""Command line front end: run one scenario and report the verdict.

Exit status: 0 when the run completed and matched its expected sequence,
1 when it ran but missed the template or timed out, 2 for bad input.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .scenario import (
    ConfigError, ScenarioRunner, audit_causality, export_tracks,
    load_scenario, plot_tracks,
)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Message-driven flight scenario simulator."""


@main.command()
@click.argument("scenario")
@click.option("--tcp", is_flag=True,
              help="Serve the broker on TCP as well, for external clients.")
@click.option("--broker-port", type=int, default=0, show_default="ephemeral",
              help="TCP port for the broker (with --tcp).")
@click.option("--gateway-port", type=int, default=None,
              help="Start the operator console gateway on this WebSocket "
                   "port even when the scenario does not ask for one.")
@click.option("--auto-ack", is_flag=True,
              help="Approve operator confirmations automatically instead "
                   "of waiting for a console.")
@click.option("--speedup", type=float, default=None,
              help="Pace the run against wall time at this multiple of "
                   "real time (default: as fast as possible).")
@click.option("--seed", type=int, default=None,
              help="Override the scenario seed recorded in the log.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False),
              default=None, help="Write the event log (JSON lines) here.")
@click.option("--export-tracks", "tracks_path",
              type=click.Path(dir_okay=False), default=None,
              help="Write flown tracks as CSV here, with a PNG beside it.")
def run(scenario: str, tcp: bool, broker_port: int,
        gateway_port: int | None, auto_ack: bool, speedup: float | None,
        seed: int | None, log_path: str | None,
        tracks_path: str | None) -> None:
    """Run SCENARIO (a shipped name such as 'nominal' or 'rerouting', or a
    path to a scenario YAML file) and check it against its event template."""
    def announce(runner: ScenarioRunner) -> None:
        if runner.tcp_server is not None:
            click.echo(f"broker: mqtt://127.0.0.1:{runner.tcp_server.port}")
        for gateway in runner.gateways:
            click.echo(f"console: ws://127.0.0.1:{gateway.port}")

    try:
        config = load_scenario(scenario)
        if seed is not None:
            config.seed = seed
        runner = ScenarioRunner(config, tcp=tcp,
                                broker_port=broker_port or 1883,
                                gateway_port=gateway_port, auto_ack=auto_ack,
                                speedup=speedup, on_ready=announce)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    result = runner.run()

    if log_path:
        result.log.dump(log_path)
        click.echo(f"event log: {log_path}")
    if tracks_path:
        csv_path = export_tracks(result.samples, tracks_path)
        png_path = plot_tracks(result.samples, csv_path, config)
        click.echo(f"tracks: {csv_path} and {png_path}")

    _report(result)
    sys.exit(0 if result.passed else 1)


def _report(result) -> None:
    if result.expected is not None:
        kinds = result.log.kinds()
        reached = True
        for want in result.expected:
            if reached and want in kinds:
                kinds = kinds[kinds.index(want) + 1:]
                mark = "ok"
            else:
                reached = False
                mark = "MISSING"
            click.echo(f"  {mark:>7}  {want}")
    for problem in audit_causality(result.log):
        click.echo(f"  causality: {problem}")
    sim_s = result.sim_end_ms / 1000.0
    verdict = "PASS" if result.passed else (
        "TIMEOUT" if result.timed_out else f"FAIL (missing {result.failure})")
    click.echo(f"{result.config.name}: {verdict} "
               f"[sim {sim_s:.1f}s, wall {result.wall_s:.2f}s, "
               f"{len(result.log.entries)} events]")


if __name__ == "__main__":
    main()
