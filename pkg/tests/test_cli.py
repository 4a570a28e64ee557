import csv
import json
import os
import shutil
import socket
import subprocess
import sys
import threading
import time

import numpy as np
import pytest

from wavecopy.cli import EXIT_NOROUTE, EXIT_OK, EXIT_VALIDATION, main
from wavecopy.scene import load_scene, save_scene


@pytest.fixture(scope="module")
def scene_files(tmp_path_factory):
    base = tmp_path_factory.mktemp("scenes")
    training = base / "training.json"
    tworoom = base / "tworoom.json"
    assert main(["scene", "preset", "--name", "training-room", "--out", str(training)]) == EXIT_OK
    assert main(["scene", "preset", "--name", "two-room", "--out", str(tworoom)]) == EXIT_OK
    return {"training": str(training), "two-room": str(tworoom)}


@pytest.fixture(scope="module")
def small_dataset(scene_files, tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ds"
    t0 = time.time()
    rc = main([
        "dataset", "generate", "--scene", scene_files["training"],
        "--n", "8", "--seed", "42", "--out", str(out),
    ])
    assert rc == EXIT_OK
    assert time.time() - t0 < 60.0  # desk-scale smoke bound
    rc = main(["dataset", "split", "--data", str(out), "--frac", "0.75", "--seed", "1"])
    assert rc == EXIT_OK
    return str(out)


class TestSceneCommands:
    def test_validate(self, scene_files):
        assert main(["scene", "validate", "--scene", scene_files["two-room"]]) == EXIT_OK

    def test_preset_roundtrip(self, scene_files):
        scene = load_scene(scene_files["two-room"])
        assert len(scene.tiles) == 3


class TestDatasetCommands:
    def test_layout(self, small_dataset):
        assert os.path.getsize(os.path.join(small_dataset, "readings.bin")) == 8 * 1600
        with open(os.path.join(small_dataset, "manifest.json")) as f:
            manifest = json.load(f)
        assert manifest["count"] == 8
        assert manifest["split"].count("train") == 6
        assert manifest["split"].count("test") == 2
        for i in range(8):
            assert os.path.exists(os.path.join(small_dataset, "photos", f"{i}_L.png"))
            assert os.path.exists(os.path.join(small_dataset, "photos", f"{i}_R.png"))

    def test_rerun_is_byte_identical(self, scene_files, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            main([
                "dataset", "generate", "--scene", scene_files["training"],
                "--n", "2", "--seed", "5", "--out", str(out),
            ])
        for name in ("readings.bin", "manifest.json", "photos/0_L.png", "photos/1_R.png"):
            with open(a / name, "rb") as fa, open(b / name, "rb") as fb:
                assert fa.read() == fb.read()


class TestCopyCommand:
    def test_canonical_report(self, scene_files, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = main(["copy", "--scene", scene_files["two-room"], "--out", str(out)])
        assert rc == EXIT_OK
        with open(out) as f:
            report = json.load(f)
        assert report["route"] == ["obj0", "tile1", "view2"]
        assert report["fidelity_continuous"] >= 0.9
        assert report["fidelity_quantized"] <= report["fidelity_continuous"] + 0.05

    def test_no_tiles_is_noroute(self, scene_files, tmp_path):
        scene = load_scene(scene_files["two-room"])
        scene.tiles = []
        bare = tmp_path / "bare.json"
        save_scene(scene, bare)
        assert main(["copy", "--scene", str(bare)]) == EXIT_NOROUTE


class TestEvaluate:
    def test_identity_fakes(self, small_dataset, tmp_path, capsys):
        fake = tmp_path / "fake"
        fake.mkdir()
        with open(os.path.join(small_dataset, "manifest.json")) as f:
            split = json.load(f)["split"]
        test_idx = [i for i, s in enumerate(split) if s == "test"]
        for i in test_idx:
            shutil.copy(
                os.path.join(small_dataset, "photos", f"{i}_L.png"), fake / f"{i}_L.png"
            )
        out = tmp_path / "eval.csv"
        rc = main(["evaluate", "--data", small_dataset, "--fake", str(fake), "--out", str(out)])
        assert rc == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["identity"]["ssim"]["median"] == pytest.approx(1.0, abs=1e-12)
        assert report["identity"]["psnr"]["non_finite"] == len(test_idx)  # +inf flagged
        assert report["shuffled"]["ssim"]["median"] < 1.0
        with open(out) as f:
            rows = list(csv.reader(f))
        assert len(rows) == 1 + len(test_idx) + 2  # header + records + 2 summary rows
        assert rows[-2][0] == "summary_identity"
        assert rows[-1][0] == "summary_shuffled"

    def test_missing_fake_is_validation_error(self, small_dataset, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        rc = main(["evaluate", "--data", small_dataset, "--fake", str(empty)])
        assert rc == EXIT_VALIDATION


class TestMetricsCompare:
    def test_compare(self, small_dataset, tmp_path, capsys):
        real = os.path.join(small_dataset, "photos")
        out = tmp_path / "cmp.csv"
        rc = main(["metrics", "compare", "--real-dir", real, "--fake-dir", real, "--out", str(out)])
        assert rc == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["ssim"]["median"] == pytest.approx(1.0, abs=1e-12)


class TestRoutingCommands:
    def test_build_graph(self, scene_files, capsys):
        assert main(["build-graph", "--scene", scene_files["two-room"]]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert "tile1" in out["nodes"]

    def test_route(self, scene_files, capsys):
        rc = main(["route", "--scene", scene_files["two-room"], "--src", "obj0", "--dst", "view2"])
        assert rc == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["route"] == ["obj0", "tile1", "view2"]

    def test_route_disjoint(self, scene_files, capsys):
        rc = main([
            "route-disjoint", "--scene", scene_files["two-room"],
            "obj0:view2", "src0:obj0",
        ])
        assert rc == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert len(out) == 2

    def test_predict(self, scene_files, capsys):
        rc = main(["predict", "--scene", scene_files["two-room"], "--src", "obj0", "--dst", "view2"])
        assert rc == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert 0.6 <= out["fidelity"] <= 1.0

    def test_budget(self, capsys):
        assert main(["budget"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["min_total_ms"] == 8.0 and out["max_total_ms"] == 39.0
        assert main(["budget", "--network"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["min_total_ms"] == 9.0 and out["max_total_ms"] == 59.0


class TestStreamCommands:
    def test_serve_and_send(self, capsys):
        port_holder = {}

        def run_server():
            port_holder["rc"] = main(["serve", "--listen", "127.0.0.1:7911"])

        server = threading.Thread(target=run_server)
        server.start()
        time.sleep(0.3)
        rc = main(["send", "--connect", "127.0.0.1:7911", "--count", "50", "--seed", "3"])
        assert rc == EXIT_OK
        server.join(timeout=20)
        assert port_holder["rc"] == EXIT_OK


class TestControllerServeCommand:
    def test_protocol_session(self, scene_files):
        proc = subprocess.Popen(
            [sys.executable, "-m", "wavecopy.cli", "controller", "serve",
             "--scene", scene_files["two-room"], "--port", "0"],
            stdout=subprocess.PIPE, text=True,
        )
        try:
            line = proc.stdout.readline()
            host, port = line.strip().rsplit(" ", 1)[-1].split(":")
            with socket.create_connection((host, int(port)), timeout=10) as sock:
                f = sock.makefile("rwb")
                f.write(b'{"v": 1, "op": "route", "src": "obj0", "dst": "view2"}\n')
                f.flush()
                out = json.loads(f.readline())
                assert out["ok"] and out["route"] == ["obj0", "tile1", "view2"]
        finally:
            proc.terminate()
            proc.wait(timeout=10)
