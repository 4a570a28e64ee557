import subprocess
import sys

import pytest

SIM = [sys.executable, "-m", "wavecopy.cli"]


def run_sim(*args):
    proc = subprocess.run([*SIM, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Six-record corpus generated through the simulator CLI, split 3/3."""
    base = tmp_path_factory.mktemp("corpus")
    scene = base / "training.json"
    data = base / "data"
    run_sim("scene", "preset", "--name", "training-room", "--out", str(scene))
    run_sim("dataset", "generate", "--scene", str(scene), "--n", "6", "--seed", "77",
            "--out", str(data))
    run_sim("dataset", "split", "--data", str(data), "--frac", "0.5", "--seed", "77")
    return str(data)
