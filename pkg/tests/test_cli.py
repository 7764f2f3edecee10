"""Command line behavior: exit codes, output files, one-line error reporting."""
from __future__ import annotations

import json
import socket
import threading
import time

from gridbench.cli import main


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--preset", "x-b1_b2-x-x", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "district" in text and str(out) in text
    for name in ("kpis.json", "kpis.txt", "trace.csv", "daily_peaks.csv"):
        assert (out / name).exists()
    report = json.loads((out / "kpis.json").read_text())
    assert report["config"] == "x-b1_b2-x-x"
    assert report["seed"] == 0


def test_seed_env_var_is_the_default(tmp_path, monkeypatch):
    monkeypatch.setenv("GRIDBENCH_SEED", "7")
    out = tmp_path / "out"
    assert main(["run", "--preset", "x-b1_b2-x-x", "--out", str(out)]) == 0
    assert json.loads((out / "kpis.json").read_text())["seed"] == 7


def test_bad_preset_is_a_one_line_config_error(capsys):
    rc = main(["run", "--preset", "not-a-real-preset-id"])
    assert rc == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "Traceback" not in err


def test_missing_dataset_is_a_config_error(tmp_path, capsys):
    rc = main(["run", "--preset", "x-b1_b2-x-x", "--data", str(tmp_path / "nope")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_validate_bundled_dataset(capsys):
    assert main(["validate-data"]) == 0
    assert "ok" in capsys.readouterr().out


def test_gen_outage_then_static_replay(tmp_path, capsys):
    schedule = tmp_path / "sched.csv"
    rc = main(["gen-outage", "--days", "30", "--saifi", "12", "--caidi", "2.0",
               "--seed", "3", "--out", str(schedule)])
    assert rc == 0
    assert schedule.exists()
    out = tmp_path / "out"
    rc = main(["run", "--preset", "x-b1_b2-x-x", "--outage", f"static:{schedule}",
               "--out", str(out)])
    assert rc == 0
    capsys.readouterr()


def _free_port() -> int:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


def test_aborted_external_episode_is_a_one_line_error(tmp_path, capsys):
    port = _free_port()

    def rogue_peer():
        # answer the first observation with garbage
        for _ in range(200):
            try:
                conn = socket.create_connection(("127.0.0.1", port), timeout=5.0)
                break
            except OSError:
                time.sleep(0.05)
        stream = conn.makefile("rwb")
        stream.readline()
        stream.write(b'{"type": "hello_ack", "agent_name": "rogue"}\n')
        stream.flush()
        stream.readline()
        stream.write(b"this is not json\n")
        stream.flush()
        conn.close()

    peer = threading.Thread(target=rogue_peer, daemon=True)
    peer.start()
    rc = main(["run", "--preset", "rbc-b1-c-bess_pv",
               "--agent", f"external:127.0.0.1:{port}", "--out", str(tmp_path / "x")])
    peer.join(timeout=10.0)
    assert rc == 1
    err = capsys.readouterr().err
    assert "step 0" in err and "malformed message" in err
    assert "Traceback" not in err
