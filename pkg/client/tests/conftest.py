"""Fixtures that drive the environment service strictly through its external
interfaces: scenario files built by the CLI and a server subprocess speaking
the RVNP1 socket protocol."""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

SCENARIO_ARGS = [
    "--split", "train", "--scene-seeds", "61,62,63",
    "--n-goal", "2", "--t-max", "200",
    "--width-m", "12", "--height-m", "12",
]


def run_cli(*argv: str) -> dict:
    proc = subprocess.run([sys.executable, "-m", "rvnsim", *argv],
                          capture_output=True, text=True, timeout=600)
    if proc.returncode != 0:
        raise RuntimeError(f"cli failed: {proc.stdout}\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


@dataclass
class LiveServer:
    address: str
    scenario_file: Path
    transcript_file: Path
    process: subprocess.Popen
    episodes: int


@pytest.fixture(scope="session")
def scenario_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("scn") / "bench.scn"
    doc = run_cli("build-scenarios", "--out", str(path), *SCENARIO_ARGS)
    assert doc["episodes"] == 6
    return path


@pytest.fixture
def server(scenario_file, tmp_path) -> LiveServer:
    transcript = tmp_path / "server_log.jsonl"
    proc = subprocess.Popen(
        [sys.executable, "-m", "rvnsim", "serve", "--scenarios",
         str(scenario_file), "--bind", "127.0.0.1:0", "--transcript",
         str(transcript)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    line = proc.stdout.readline()
    head = json.loads(line)
    live = LiveServer(head["listening"], scenario_file, transcript, proc,
                      head["episodes"])
    yield live
    proc.terminate()
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        proc.kill()
