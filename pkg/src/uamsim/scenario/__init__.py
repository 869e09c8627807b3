from .config import ConfigError, ScenarioConfig, load_scenario, parse_scenario
from .runner import (
    NOMINAL_SEQUENCE, REROUTING_SEQUENCE, TEMPLATES,
    EventLog, RunResult, ScenarioRunner,
    assert_sequence, audit_causality, run_scenario,
)
from .tracks import export_tracks, plot_tracks

__all__ = [
    "ConfigError", "ScenarioConfig", "load_scenario", "parse_scenario",
    "NOMINAL_SEQUENCE", "REROUTING_SEQUENCE", "TEMPLATES",
    "EventLog", "RunResult", "ScenarioRunner",
    "assert_sequence", "audit_causality", "run_scenario",
    "export_tracks", "plot_tracks",
]
