"""The command-line client: printed output, flags, and exit codes."""
from __future__ import annotations

import shutil
import subprocess
import threading
import time
from datetime import date

import pytest

from stockrag.cli import main

from conftest import FIXTURES, write_fixture_config

CONFIG = str(FIXTURES / "config.json")


class TestSubcommands:
    def test_ingest(self, tmp_path, capsys):
        assert main(["ingest", "--config", CONFIG, "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "ingested 2 companies, 12 articles, 1210 price bars, 8 quarters" in out

    def test_build_prompts(self, tmp_path, capsys):
        rc = main(["build-prompts", "--config", CONFIG, "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "built 16 prompt bundles (0 unbuildable, 0 unlabeled)" in out
        assert str(tmp_path / "prompts.jsonl") in out

    def test_predict_dry_run(self, pipeline_out, capsys):
        _, _, out_dir = pipeline_out
        rc = main(
            ["predict", "--config", CONFIG, "--out", str(out_dir), "--dry-run"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "dry run: no requests sent" in out
        assert "160 requests planned" in out
        assert "0 over budget" in out

    def test_predict_and_evaluate(self, pipeline_out, tmp_path, capsys):
        _, _, out_dir = pipeline_out
        shutil.copy(out_dir / "prompts.jsonl", tmp_path / "prompts.jsonl")
        assert main(["predict", "--config", CONFIG, "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "recorded 350 predictions (10 failures)" in out
        assert "invalid rate 0.067" in out
        assert main(["evaluate", "--config", CONFIG, "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "evaluated 3 model/shot rows" in out
        for fmt in ("csv", "json", "markdown"):
            assert f"{fmt}: " in out

    def test_run(self, tmp_path, capsys):
        assert main(["run", "--config", CONFIG, "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "ingested 2 companies" in out
        assert "built 16 prompt bundles" in out
        assert "recorded 350 predictions" in out
        assert "evaluated 3 model/shot rows" in out

    def test_run_dry(self, tmp_path, capsys):
        rc = main(["run", "--config", CONFIG, "--out", str(tmp_path), "--dry-run"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "dry run: no requests sent" in out
        assert "recorded" not in out
        assert "evaluated" not in out

    def test_runs_flag_forwarded(self, pipeline_out, capsys):
        _, _, out_dir = pipeline_out
        rc = main(
            [
                "predict",
                "--config",
                CONFIG,
                "--out",
                str(out_dir),
                "--dry-run",
                "--runs",
                "3",
            ]
        )
        assert rc == 0
        assert "48 requests planned" in capsys.readouterr().out


class TestExitCodes:
    def test_missing_predictions_maps_to_2(self, tmp_path, capsys):
        rc = main(["evaluate", "--config", CONFIG, "--out", str(tmp_path)])
        assert rc == 2
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "predictions" in err

    def test_missing_config_file_maps_to_2(self, tmp_path, capsys):
        rc = main(["ingest", "--config", str(tmp_path / "absent.json")])
        assert rc == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_nothing_buildable_maps_to_3(self, tmp_path, capsys):
        config = write_fixture_config(
            tmp_path,
            as_of_dates=[date(2020, 6, 1).isoformat()],
            out_dir=str(tmp_path / "out"),
        )
        rc = main(["build-prompts", "--config", str(config)])
        assert rc == 3
        assert "no buildable" in capsys.readouterr().err

    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_config_flag_required(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["ingest"])
        assert excinfo.value.code == 2


class TestServerMode:
    def test_server_flag_targets_running_service(self, tmp_path):
        uvicorn = pytest.importorskip("uvicorn")
        from stockrag.service.app import create_app

        server = uvicorn.Server(
            uvicorn.Config(
                create_app(), host="127.0.0.1", port=0, log_level="warning"
            )
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.monotonic() + 10.0
            while not server.started:
                if time.monotonic() > deadline:
                    pytest.fail("service did not start within 10 seconds")
                time.sleep(0.02)
            port = server.servers[0].sockets[0].getsockname()[1]
            rc = main(
                [
                    "ingest",
                    "--config",
                    CONFIG,
                    "--out",
                    str(tmp_path),
                    "--server",
                    f"http://127.0.0.1:{port}",
                ]
            )
            assert rc == 0
            assert (tmp_path / "ingest_summary.json").exists()
        finally:
            server.should_exit = True
            thread.join(timeout=5)

    def test_unreachable_server_fails_cleanly(self, tmp_path, capsys):
        rc = main(
            [
                "ingest",
                "--config",
                CONFIG,
                "--out",
                str(tmp_path),
                "--server",
                "http://127.0.0.1:9",  # discard port: nothing listens there
            ]
        )
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error: cannot reach http://127.0.0.1:9")


class TestInstalledScript:
    def test_console_entry_point(self, tmp_path):
        executable = shutil.which("stockrag")
        if executable is None:
            pytest.skip("package not installed with console scripts")
        result = subprocess.run(
            [executable, "ingest", "--config", CONFIG, "--out", str(tmp_path)],
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert result.returncode == 0
        assert "ingested 2 companies" in result.stdout
