"""relayctl: config validation, daemon lifecycle and the admin subcommands."""

import json
import signal
import socket
import subprocess
import sys
import textwrap
import time

import pytest
import requests

from oairelay.clock import SimClock
from oairelay.cli import main as relayctl_main
from oairelay.harness.simdp import SimDpConfig, spawn_sim_dp


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def write_config(path, text: str) -> str:
    path.write_text(textwrap.dedent(text))
    return str(path)


def aggregator_config(tmp_path, *, port: int, base_url: str) -> str:
    storage = tmp_path / "store"
    storage.mkdir(exist_ok=True)
    return write_config(
        tmp_path / "relay.yaml",
        f"""\
        aggregator:
          listen: {{host: 127.0.0.1, port: {port}}}
          storageDir: {storage}
          repositories:
            - repositoryId: alpha
              baseURL: {base_url}
              trustRank: 1
        """,
    )


class TestValidateConfig:
    def test_full_config_lists_all_components(self, tmp_path, capsys):
        storage = tmp_path / "store"
        storage.mkdir()
        cfg = write_config(
            tmp_path / "relay.yaml",
            f"""\
            proxy:
              listen: {{host: 127.0.0.1, port: 0}}
              routes:
                - repositoryId: alpha
                  baseURL: http://127.0.0.1:9/oai
            aggregator:
              listen: {{host: 127.0.0.1, port: 0}}
              storageDir: {storage}
              repositories:
                - repositoryId: alpha
                  baseURL: http://127.0.0.1:9/oai
                  trustRank: 1
            gateway:
              listen: {{host: 127.0.0.1, port: 0}}
            """,
        )
        assert relayctl_main(["-c", cfg, "validate-config"]) == 0
        out = capsys.readouterr().out
        assert "configuration OK (proxy, aggregator, gateway)" in out

    def test_aggregator_only(self, tmp_path, capsys):
        cfg = aggregator_config(tmp_path, port=0, base_url="http://127.0.0.1:9/oai")
        assert relayctl_main(["-c", cfg, "validate-config"]) == 0
        assert "configuration OK (aggregator)" in capsys.readouterr().out

    def test_missing_file_exits_two(self, tmp_path, capsys):
        code = relayctl_main(["-c", str(tmp_path / "nope.yaml"), "validate-config"])
        assert code == 2
        assert "configuration error:" in capsys.readouterr().err

    def test_invalid_yaml_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "relay.yaml", "aggregator: [unclosed\n")
        assert relayctl_main(["-c", cfg, "validate-config"]) == 2

    def test_missing_storage_dir_names_the_path(self, tmp_path, capsys):
        missing = tmp_path / "absent"
        cfg = write_config(
            tmp_path / "relay.yaml",
            f"""\
            aggregator:
              storageDir: {missing}
            """,
        )
        assert relayctl_main(["-c", cfg, "validate-config"]) == 2
        err = capsys.readouterr().err
        assert str(missing) in err

    def test_duplicate_repository_id_exits_two(self, tmp_path, capsys):
        storage = tmp_path / "store"
        storage.mkdir()
        cfg = write_config(
            tmp_path / "relay.yaml",
            f"""\
            aggregator:
              storageDir: {storage}
              repositories:
                - {{repositoryId: alpha, baseURL: "http://h/oai", trustRank: 1}}
                - {{repositoryId: alpha, baseURL: "http://h/oai", trustRank: 2}}
            """,
        )
        assert relayctl_main(["-c", cfg, "validate-config"]) == 2
        assert "duplicate 'alpha'" in capsys.readouterr().err

    def test_all_problems_reported_together(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "relay.yaml",
            f"""\
            aggregator:
              storageDir: {tmp_path / "absent"}
              pageSize: -5
              repositories:
                - {{repositoryId: alpha, baseURL: "http://h/oai", trustRank: 1,
                    reliabilityMode: psychic}}
            """,
        )
        assert relayctl_main(["-c", cfg, "validate-config"]) == 2
        err = capsys.readouterr().err
        assert "storageDir" in err
        assert "pageSize" in err
        assert "reliabilityMode" in err


@pytest.fixture(scope="module")
def daemon(tmp_path_factory):
    """A live `relayctl run aggregator` subprocess fed by one simulated DP."""
    root = tmp_path_factory.mktemp("cli-daemon")
    dp = spawn_sim_dp(SimDpConfig("alpha", record_count=12), SimClock())
    port = free_port()
    cfg = aggregator_config(root, port=port, base_url=dp.oai_url)
    admin = f"http://127.0.0.1:{port}"
    proc = subprocess.Popen(
        [sys.executable, "-m", "oairelay.cli", "-c", cfg, "run", "aggregator"],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    try:
        deadline = time.monotonic() + 20
        while True:
            try:
                requests.get(f"{admin}/admin/status", timeout=1)
                break
            except requests.RequestException:
                if time.monotonic() > deadline or proc.poll() is not None:
                    raise RuntimeError("daemon did not come up")
                time.sleep(0.1)
        requests.post(
            f"{admin}/admin/harvest", json={"repositoryId": "alpha"}, timeout=60
        ).raise_for_status()
        yield {"cfg": cfg, "admin": admin, "dp": dp}
    finally:
        if proc.poll() is None:
            proc.send_signal(signal.SIGINT)
            proc.wait(timeout=15)
        dp.close()


class TestDaemonCommands:
    def test_harvest_now_prints_summary(self, daemon, capsys):
        assert relayctl_main(["-c", daemon["cfg"], "harvest-now", "alpha"]) == 0
        out = capsys.readouterr().out
        assert "alpha: ingested 0, collided 0, dropped 0" in out

    def test_harvest_now_json(self, daemon, capsys):
        code = relayctl_main(
            ["-c", daemon["cfg"], "harvest-now", "alpha", "--format", "json"]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["repositoryId"] == "alpha"
        assert report["ok"] is True
        assert report["harvests"][0]["pages"] >= 1
        assert report["repository"]["status"] == "active"

    def test_harvest_now_unknown_repository(self, daemon, capsys):
        code = relayctl_main(["-c", daemon["cfg"], "harvest-now", "ghost"])
        assert code == 1
        assert "unknown repository: ghost" in capsys.readouterr().err

    def test_status_table(self, daemon, capsys):
        assert relayctl_main(["-c", daemon["cfg"], "status"]) == 0
        out = capsys.readouterr().out
        assert "records: 12" in out
        assert "REPOSITORY" in out
        row = next(line for line in out.splitlines() if line.startswith("alpha"))
        assert "active" in row
        assert " 12" in row

    def test_status_json(self, daemon, capsys):
        assert relayctl_main(["-c", daemon["cfg"], "status", "--format", "json"]) == 0
        status = json.loads(capsys.readouterr().out)
        assert status["records"] == 12
        assert status["repositories"][0]["repositoryId"] == "alpha"
        assert status["repositories"][0]["storedRecords"] == 12

    def test_harvest_now_failure_reports_and_exits_one(self, daemon, capsys):
        daemon["dp"].set_down(True)
        try:
            code = relayctl_main(["-c", daemon["cfg"], "harvest-now", "alpha"])
        finally:
            daemon["dp"].set_down(False)
        captured = capsys.readouterr()
        assert code == 1
        assert "FAILED" in captured.err
        assert "next attempt due" in captured.err


class TestWithoutDaemon:
    def test_status_unreachable_exits_one(self, tmp_path, capsys):
        cfg = aggregator_config(
            tmp_path, port=free_port(), base_url="http://127.0.0.1:9/oai"
        )
        assert relayctl_main(["-c", cfg, "status", "--timeout", "2"]) == 1
        assert "unreachable" in capsys.readouterr().err

    def test_harvest_now_unreachable_exits_one(self, tmp_path, capsys):
        cfg = aggregator_config(
            tmp_path, port=free_port(), base_url="http://127.0.0.1:9/oai"
        )
        code = relayctl_main(["-c", cfg, "harvest-now", "alpha", "--timeout", "2"])
        assert code == 1
        assert "unreachable" in capsys.readouterr().err

    def test_status_needs_aggregator_section(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "relay.yaml",
            """\
            proxy:
              listen: {host: 127.0.0.1, port: 0}
            """,
        )
        assert relayctl_main(["-c", cfg, "status"]) == 2
        assert "aggregator" in capsys.readouterr().err

    def test_run_with_missing_section_exits_two(self, tmp_path, capsys):
        cfg = aggregator_config(tmp_path, port=0, base_url="http://127.0.0.1:9/oai")
        assert relayctl_main(["-c", cfg, "run", "gateway"]) == 2
        assert "gateway: section missing" in capsys.readouterr().err


class TestShutdown:
    def test_sigint_shuts_down_cleanly(self, tmp_path):
        cfg = aggregator_config(
            tmp_path, port=free_port(), base_url="http://127.0.0.1:9/oai"
        )
        proc = subprocess.Popen(
            [sys.executable, "-m", "oairelay.cli", "-c", cfg, "run", "aggregator"],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        try:
            deadline = time.monotonic() + 20
            while "listening" not in proc.stdout.readline():
                assert time.monotonic() < deadline
            proc.send_signal(signal.SIGINT)
            out, _ = proc.communicate(timeout=15)
        finally:
            if proc.poll() is None:
                proc.kill()
        assert proc.returncode == 0
        assert "shut down cleanly" in out
