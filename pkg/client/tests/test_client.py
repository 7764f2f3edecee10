"""Client-side protocol tests against a scripted in-process harness."""
from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from client import parse_address, rbc_cost_value, run_client

CLIENT = Path(__file__).resolve().parent.parent / "client.py"


def weekday_schedule() -> list[float]:
    return [rbc_cost_value(h, 3) for h in range(24)]


def test_rbc_cost_weekday_values():
    values = weekday_schedule()
    for hour in list(range(7)) + [22, 23]:
        assert values[hour] == 1.0 / 9.0
    for hour in (15, 16, 17):
        assert values[hour] == -0.5 / 3.0
    for hour in list(range(7, 15)) + list(range(18, 22)):
        assert values[hour] == -0.5 / 12.0


def test_rbc_cost_weekday_budget_balances():
    values = weekday_schedule()
    charge = sum(v for v in values if v > 0)
    discharge = sum(v for v in values if v < 0)
    assert charge == pytest.approx(1.0, abs=1e-12)
    assert discharge == pytest.approx(-1.0, abs=1e-12)


def test_rbc_cost_weekend_is_flat_trickle():
    for dow in (6, 7):
        assert [rbc_cost_value(h, dow) for h in range(24)] == [1.0 / 24.0] * 24


def test_parse_address():
    assert parse_address("127.0.0.1:9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_address("9000")
    with pytest.raises(ValueError):
        parse_address(":9000")


class ScriptedHarness(threading.Thread):
    """Accepts one client and plays a fixed list of server turns.

    Each turn is either a dict to send, the string "recv" to read one client
    message, or "close" to hang up immediately.
    """

    def __init__(self, turns, bind_delay_s: float = 0.0):
        super().__init__(daemon=True)
        self.turns = turns
        self.bind_delay_s = bind_delay_s
        self.received: list[dict] = []
        self.error: BaseException | None = None
        # reserve a port without holding it so a delayed bind can reuse it
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        self.port = probe.getsockname()[1]
        probe.close()

    def run(self):
        try:
            if self.bind_delay_s:
                time.sleep(self.bind_delay_s)
            server = socket.socket()
            server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            server.bind(("127.0.0.1", self.port))
            server.listen(1)
            server.settimeout(10.0)
            conn, _ = server.accept()
            conn.settimeout(10.0)
            stream = conn.makefile("rwb")
            for turn in self.turns:
                if turn == "recv":
                    line = stream.readline()
                    if not line:
                        raise AssertionError("client closed early")
                    self.received.append(json.loads(line))
                elif turn == "close":
                    break
                elif isinstance(turn, bytes):
                    stream.write(turn)
                    stream.flush()
                else:
                    stream.write((json.dumps(turn) + "\n").encode())
                    stream.flush()
            conn.close()
            server.close()
        except BaseException as exc:  # surfaced by finish()
            self.error = exc

    def finish(self):
        self.join(timeout=10.0)
        assert not self.is_alive(), "scripted harness hung"
        if self.error is not None:
            raise self.error


def hello(observations, actions):
    return {
        "type": "hello",
        "version": 1,
        "observation_names": observations,
        "action_names": actions,
        "ranges": {name: [-1.0, 1.0] for name in actions},
    }


OBS = ["hour", "day_of_week", "B1.battery_soc"]
ACTS = ["B1.battery", "B1.dhw_storage"]


def episode_turns(rows, kpis=None):
    turns = [hello(OBS, ACTS), "recv"]
    for step, values in enumerate(rows):
        turns.append({"type": "obs", "step": step, "values": values,
                      "reward": None if step == 0 else -1.0, "done": False})
        turns.append("recv")
    turns.append({"type": "end", "kpis": kpis or {}, "reward": -1.0})
    return turns


def run_against(harness, argv):
    harness.start()
    rc = run_client(argv + ["--connect", f"127.0.0.1:{harness.port}"])
    harness.finish()
    return rc


def test_full_episode_sends_schedule_and_exits_zero(capsys):
    rows = [[2.0, 4.0, 0.5], [16.0, 4.0, 0.6], [9.0, 6.0, 0.7]]
    harness = ScriptedHarness(episode_turns(rows, kpis={"district": {"cost": 1.0}}))
    rc = run_against(harness, ["--policy", "rbc-cost"])
    assert rc == 0
    ack, *acts = harness.received
    assert ack == {"type": "hello_ack", "agent_name": "rbc-cost-client"}
    expected = [1.0 / 9.0, -0.5 / 3.0, 1.0 / 24.0]
    for act, value in zip(acts, expected):
        assert act["type"] == "act"
        assert act["values"] == [value, value]
    out = json.loads(capsys.readouterr().out)
    assert out == {"district": {"cost": 1.0}}


def test_random_policy_stays_inside_ranges():
    rows = [[float(h), 1.0, 0.0] for h in range(8)]
    harness = ScriptedHarness(episode_turns(rows))
    rc = run_against(harness, ["--policy", "random", "--seed", "7"])
    assert rc == 0
    acts = [m for m in harness.received if m.get("type") == "act"]
    assert len(acts) == 8
    for act in acts:
        assert all(-1.0 <= v <= 1.0 for v in act["values"])


def test_random_policy_is_seed_deterministic():
    rows = [[0.0, 1.0, 0.0]] * 3
    runs = []
    for _ in range(2):
        harness = ScriptedHarness(episode_turns(rows))
        assert run_against(harness, ["--policy", "random", "--seed", "11"]) == 0
        runs.append([m["values"] for m in harness.received if m.get("type") == "act"])
    assert runs[0] == runs[1]


def test_connects_while_harness_binds_late():
    harness = ScriptedHarness(episode_turns([[0.0, 1.0, 0.0]]), bind_delay_s=0.4)
    assert run_against(harness, ["--policy", "rbc-cost"]) == 0


def test_error_message_exits_nonzero(capsys):
    harness = ScriptedHarness(
        [hello(OBS, ACTS), "recv", {"type": "error", "message": "act arity mismatch"}]
    )
    rc = run_against(harness, ["--policy", "rbc-cost"])
    assert rc == 1
    assert "act arity mismatch" in capsys.readouterr().err


def test_mid_episode_disconnect_exits_nonzero(capsys):
    harness = ScriptedHarness(
        [hello(OBS, ACTS), "recv",
         {"type": "obs", "step": 0, "values": [0.0, 1.0, 0.0],
          "reward": None, "done": False},
         "recv", "close"]
    )
    rc = run_against(harness, ["--policy", "rbc-cost"])
    assert rc == 1
    assert "connection closed" in capsys.readouterr().err


def test_malformed_harness_json_exits_nonzero(capsys):
    harness = ScriptedHarness([hello(OBS, ACTS), "recv", b"{not json\n"])
    rc = run_against(harness, ["--policy", "rbc-cost"])
    assert rc == 1
    assert "malformed" in capsys.readouterr().err


def test_wrong_protocol_version_exits_nonzero(capsys):
    bad = hello(OBS, ACTS)
    bad["version"] = 99
    harness = ScriptedHarness([bad])
    rc = run_against(harness, [])
    assert rc == 1
    assert "version" in capsys.readouterr().err


def test_rbc_cost_requires_calendar_observations(capsys):
    harness = ScriptedHarness([hello(["B1.battery_soc"], ACTS)])
    rc = run_against(harness, ["--policy", "rbc-cost"])
    assert rc == 1
    assert "day_of_week" in capsys.readouterr().err


def test_unknown_message_types_are_skipped():
    turns = [hello(OBS, ACTS), "recv",
             {"type": "heartbeat"},
             {"type": "obs", "step": 0, "values": [0.0, 1.0, 0.0],
              "reward": None, "done": False},
             "recv", {"type": "end", "kpis": {}, "reward": None}]
    harness = ScriptedHarness(turns)
    assert run_against(harness, ["--policy", "rbc-cost"]) == 0


def test_refused_connection_times_out(monkeypatch, capsys):
    monkeypatch.setattr("client.CONNECT_WINDOW_S", 0.3)
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    rc = run_client(["--connect", f"127.0.0.1:{port}", "--policy", "rbc-cost"])
    assert rc == 1
    assert "could not connect" in capsys.readouterr().err


def test_bad_address_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        run_client(["--connect", "nonsense", "--policy", "rbc-cost"])
    assert excinfo.value.code == 2


def test_script_runs_as_subprocess():
    rows = [[22.0, 2.0, 0.1]]
    harness = ScriptedHarness(episode_turns(rows, kpis={"district": {"cost": 0.0}}))
    harness.start()
    proc = subprocess.run(
        [sys.executable, str(CLIENT), "--connect", f"127.0.0.1:{harness.port}",
         "--policy", "rbc-cost"],
        capture_output=True, text=True, timeout=30,
    )
    harness.finish()
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout) == {"district": {"cost": 0.0}}
