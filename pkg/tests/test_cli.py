from __future__ import annotations

import json
import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

from masbus.cli import main

LISTING_STYLE = """\
<routes>
  <route id="customer">
    <from uri="jason:DummyCustomerAgent"/>
    <to uri="telegram:bots/sometoken?chatId=-364531"/>
  </route>
</routes>
"""

WITH_ALIASES = """\
<routes>
  <aliases>
    <alias scheme="telegram" component="chatstub"/>
  </aliases>
  <route id="customer">
    <from uri="jason:DummyCustomerAgent"/>
    <to uri="telegram:bots/sometoken?chatId=-364531"/>
  </route>
</routes>
"""


def write(tmp_path: Path, name: str, text: str) -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_validate_ok_with_alias_block(tmp_path, capsys):
    path = write(tmp_path, "routes.xml", WITH_ALIASES)
    assert main(["validate", path]) == 0
    assert "1 route(s) ok" in capsys.readouterr().out


def test_validate_ok_with_alias_flag(tmp_path):
    path = write(tmp_path, "routes.xml", LISTING_STYLE)
    assert main(["validate", path, "--alias", "telegram=chatstub"]) == 0


def test_validate_unresolved_scheme_exit_3(tmp_path, capsys):
    path = write(tmp_path, "routes.xml", LISTING_STYLE)
    assert main(["validate", path]) == 3
    assert "telegram" in capsys.readouterr().err


def test_validate_parse_error_exit_2_with_location(tmp_path, capsys):
    broken = "<routes>\n  <route>\n    <from uri=\"a:x\"/>\n  </route>\n</routes>"
    path = write(tmp_path, "routes.xml", broken)
    assert main(["validate", path]) == 2
    err = capsys.readouterr().err
    assert "2:" in err  # line of the offending <route>


def test_validate_unreadable_file_exit_2(tmp_path):
    assert main(["validate", str(tmp_path / "missing.xml")]) == 2


def test_run_bind_conflict_exit_4(tmp_path, capsys):
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen()
    port = blocker.getsockname()[1]
    routes = f"""\
<routes>
  <route id="in">
    <from uri="tcpline:127.0.0.1:{port}"/>
    <to uri="chatstub:bots/t?chatId=1"/>
  </route>
</routes>
"""
    path = write(tmp_path, "routes.xml", routes)
    try:
        assert main(["run", path]) == 4
        assert "start failed" in capsys.readouterr().err
    finally:
        blocker.close()


def test_run_traces_deliveries_and_stops_on_sigint(tmp_path):
    routes = """\
<routes>
  <route id="loop">
    <from uri="timer:t?periodMs=20"/>
    <to uri="chatstub:bots/t?chatId=1"/>
  </route>
</routes>
"""
    path = write(tmp_path, "routes.xml", routes)
    env = dict(os.environ, PYTHONPATH=str(Path(__file__).resolve().parents[1] / "src"))
    proc = subprocess.Popen(
        [sys.executable, "-m", "masbus", "run", path, "--trace"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        env=env,
    )
    try:
        time.sleep(1.0)
        proc.send_signal(signal.SIGINT)
        out, err = proc.communicate(timeout=10)
    finally:
        if proc.poll() is None:
            proc.kill()
    assert proc.returncode == 0, err
    trace_lines = [l for l in out.splitlines() if l.startswith("exchange=")]
    assert trace_lines, out
    assert "route=loop" in trace_lines[0]
    assert "from=timer:t?periodMs=20" in trace_lines[0]
    assert "to=chatstub:bots/t?chatId=1" in trace_lines[0]


def test_run_simulated_time_fires_timers_and_stops_cleanly(tmp_path):
    routes = """\
<routes>
  <route id="ticker">
    <from uri="timer:t?periodMs=100"/>
    <to uri="chatstub:bots/x?chatId=9"/>
  </route>
</routes>
"""
    path = write(tmp_path, "routes.xml", routes)
    env = dict(os.environ, PYTHONPATH=str(Path(__file__).resolve().parents[1] / "src"))
    proc = subprocess.Popen(
        [sys.executable, "-m", "masbus", "run", path, "--trace", "--simulated-time"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        env=env,
    )
    try:
        time.sleep(1.0)
        proc.send_signal(signal.SIGINT)
        out, err = proc.communicate(timeout=15)
    finally:
        if proc.poll() is None:
            proc.kill()
    assert proc.returncode == 0, err
    traced = [l for l in out.splitlines() if l.startswith("exchange=")]
    # logical time runs much faster than the 100 ms period suggests
    assert len(traced) > 20, out


def nominal_config_dict():
    return {
        "seed": 3,
        "supplier_quotes": [["alpha", 10.0], ["beta", 7.5]],
        "track_waypoints": [[1.0, 1.0], [0.01, 0.01]],
        "destination": [0.0, 0.0],
        "near_threshold_km": 5.0,
        "tick_period_ms": 10.0,
    }


def test_scenario_cli_writes_report(tmp_path, capsys):
    config = write(tmp_path, "config.json", json.dumps(nominal_config_dict()))
    report_out = str(tmp_path / "report.json")
    code = main(["scenario", config, "--simulated-time", "--report-out", report_out])
    assert code == 0
    report = json.loads(Path(report_out).read_text())
    assert set(report["stage_timestamps"]) == {"i", "ii", "iii", "iv", "v"}
    assert report["winner_supplier"] == "beta"


def test_scenario_cli_prints_report_to_stdout(tmp_path, capsys):
    config = write(tmp_path, "config.json", json.dumps(nominal_config_dict()))
    assert main(["scenario", config, "--simulated-time"]) == 0
    out = capsys.readouterr().out
    assert json.loads(out)["winner_supplier"] == "beta"


def test_scenario_cli_rejects_bad_config(tmp_path, capsys):
    bad = nominal_config_dict()
    bad["supplier_quotes"] = [["only", 1.0]]
    config = write(tmp_path, "config.json", json.dumps(bad))
    assert main(["scenario", config, "--simulated-time"]) == 2
    assert "supplier" in capsys.readouterr().err


def test_scenario_cli_reports_violations_exit_5(tmp_path, capsys, monkeypatch):
    # a clean run cannot produce violations, so fault the checker itself
    import masbus.cli as cli_module

    monkeypatch.setattr(
        cli_module, "assert_report", lambda report, cfg: ["winner mismatch (injected)"]
    )
    config = write(tmp_path, "config.json", json.dumps(nominal_config_dict()))
    assert main(["scenario", config, "--simulated-time"]) == 5
    assert "winner mismatch" in capsys.readouterr().err


def test_scenario_cli_stage_timeout_exit_6(tmp_path, capsys):
    cfg = nominal_config_dict()
    cfg["track_waypoints"] = [[40.0, 40.0], [41.0, 41.0]]
    cfg["stage_timeout_s"] = 0.8
    config = write(tmp_path, "config.json", json.dumps(cfg))
    assert main(["scenario", config, "--simulated-time"]) == 6
    assert "timed out" in capsys.readouterr().err
