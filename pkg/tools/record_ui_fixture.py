"""Record the rerouting run's operator UI stream into frontend test fixtures.

Writes the gateway event stream (JSON lines, one event per line, each
stamped with the simulated time it was emitted) plus the manager's
authoritative snapshot at stream end. The console's replay test folds the
stream through its reducer and compares the result against that snapshot.

Re-run after changing the gateway event shapes or the rerouting scenario:

    python3 tools/record_ui_fixture.py
"""
import json
from pathlib import Path

from uamsim.scenario import ScenarioRunner, load_scenario

FIXTURES = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures"
VERTIDROME = "VD_BINNENALSTER"


def main() -> None:
    runner = ScenarioRunner(load_scenario("rerouting"), auto_ack=True)
    recorder = runner.attach_recorder(VERTIDROME)
    result = runner.run()
    if not result.passed:
        raise SystemExit(f"rerouting run failed: missing {result.failure!r}")

    FIXTURES.mkdir(parents=True, exist_ok=True)
    recorder.dump(FIXTURES / "rerouting-ui.jsonl")
    snapshot = runner.managers[VERTIDROME].snapshot()
    with open(FIXTURES / "rerouting-final-snapshot.json", "w",
              encoding="utf-8") as fh:
        json.dump(snapshot, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{len(recorder.lines)} events, final sim time "
          f"{snapshot['sim_time_ms']} ms")


if __name__ == "__main__":
    main()
