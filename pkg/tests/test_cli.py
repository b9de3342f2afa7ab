import hashlib
import json

import numpy as np
import pytest
from PIL import Image

from antidazzle.cli import main
from antidazzle.forward import fft_convolve_full
from antidazzle.io import write_adpf

from conftest import smooth_scene

SMALL = {
    "optics": {"pupil_dims": [1024, 1024], "pupil_pitch": [1.496e-05, 1.496e-05]},
    "sensor": {"resolution": [48, 40]},
    "dataset": {"work_dims": [24, 24], "padded_dims": [32, 32]},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_print_defaults(capsys):
    code, out, _ = run(capsys, "--print-defaults")
    assert code == 0
    assert json.loads(out)["sensor"]["full_well"] == 25500.0


def test_gen_psf(tmp_path, cfg_path, capsys):
    code, out, _ = run(capsys, "gen-psf", "--config", cfg_path, "--mask", "none", "--out", tmp_path / "p0.adpf")
    assert code == 0 and json.loads(out)["lsr"] == 1.0
    code, out, _ = run(capsys, "gen-psf", "--config", cfg_path, "--out", tmp_path / "p1.adpf")
    s1 = json.loads(out)
    assert s1["lsr"] < 0.01 and s1["energy_rel_diff"] < 1e-9 and s1["support_px"] % 2 == 1
    first = (tmp_path / "p1.adpf").read_bytes()
    run(capsys, "gen-psf", "--config", cfg_path, "--out", tmp_path / "p1.adpf")
    assert (tmp_path / "p1.adpf").read_bytes() == first


@pytest.fixture
def scene_png(tmp_path):
    img = (smooth_scene(np.random.default_rng(0), 60, 64) * 255).round().astype(np.uint8)
    p = tmp_path / "scene.png"
    Image.fromarray(img).save(p)
    return p


def test_simulate_preset_and_determinism(tmp_path, cfg_path, scene_png, capsys):
    code, out, _ = run(capsys, "simulate", "--config", cfg_path, "--scene", scene_png, "--preset", "H2",
                       "--seed", 5, "--out", tmp_path / "a")
    assert code == 0
    rec = json.loads(out)
    side = json.loads((tmp_path / "a" / "sample.json").read_text())
    assert side["spec"]["alpha_l"] == 1.5e6 and side["spec"]["alpha_b"] == 0.2 and side["spec"]["c1"] == 0.2
    run(capsys, "simulate", "--config", cfg_path, "--scene", scene_png, "--preset", "H2", "--seed", 5,
        "--out", tmp_path / "b")
    for key, f in rec["files"].items():
        assert hashlib.sha256((tmp_path / "b" / f["path"]).read_bytes()).hexdigest() == f["sha256"]


def test_simulate_without_laser(tmp_path, cfg_path, scene_png, capsys):
    code, out, _ = run(capsys, "simulate", "--config", cfg_path, "--scene", scene_png, "--alpha-l", 0,
                       "--out", tmp_path / "c")
    assert code == 0 and json.loads(out)["laser_energy"] == 0.0


def test_synth_restore_evaluate(tmp_path, cfg_path, scene_png, capsys):
    scenes = scene_png.parent
    code, out, _ = run(capsys, "synth-dataset", "--config", cfg_path, "--scenes", scenes, "--count", 3,
                       "--seed", 7, "--out", tmp_path / "ds")
    assert code == 0
    h1 = json.loads(out)["manifest_sha256"]
    _, out, _ = run(capsys, "synth-dataset", "--config", cfg_path, "--scenes", scenes, "--count", 3,
                    "--seed", 7, "--out", tmp_path / "ds2", "--jobs", 2)
    assert json.loads(out)["manifest_sha256"] == h1
    code, out, _ = run(capsys, "restore", "--config", cfg_path, "--manifest", tmp_path / "ds" / "manifest.jsonl",
                       "--fit", "--search", 1e-6, 1e1, "--out", tmp_path / "rest")
    assert code == 0
    card = json.loads((tmp_path / "rest" / "model_card.json").read_text())
    assert card["manifest_sha256"] == h1 and 1e-6 <= card["gamma"] <= 1e1
    code, out, _ = run(capsys, "evaluate", "--pred", tmp_path / "ds" / "000000_truth.png",
                       "--truth", tmp_path / "ds" / "000000_truth.png", "--out-csv", tmp_path / "r.csv")
    row = json.loads(out)["images"][0]
    assert row["psnr_db"] == float("inf") and row["ssim"] == 1.0
    assert "inf" in (tmp_path / "r.csv").read_text()
    code, out, _ = run(capsys, "restore", "--config", cfg_path, "--manifest", tmp_path / "ds" / "manifest.jsonl",
                       "--model", tmp_path / "rest" / "model_card.json", "--out", tmp_path / "pred")
    assert code == 0
    # <stem>_restored.png pairs with <stem>_truth.png in the dataset directory
    code, out, _ = run(capsys, "evaluate", "--pred", tmp_path / "pred", "--truth", tmp_path / "ds")
    rows = json.loads(out)["images"]
    assert code == 0 and [r["name"] for r in rows] == [f"00000{i}_restored.png" for i in range(3)]


def test_restore_roundtrip_then_evaluate(tmp_path, capsys):
    rng = np.random.default_rng(1)
    b = rng.random((64, 64))
    r = np.arange(9) - 4
    k = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / 2.0)
    k /= k.sum()
    write_adpf(tmp_path / "k.adpf", k, 1.0, 1.0)
    full = fft_convolve_full(b, k)
    write_adpf(tmp_path / "full.adpf", full, 1.0, 1.0)
    # the full linear blur already carries the PSF support around the scene
    code, _, _ = run(capsys, "restore", "--input", tmp_path / "full.adpf", "--psf", tmp_path / "k.adpf",
                     "--gamma", 1e-12, "--pad", 0, "--out", tmp_path / "full_out.adpf")
    assert code == 0
    padded_truth = np.zeros_like(full)
    padded_truth[4:68, 4:68] = b
    write_adpf(tmp_path / "padded_truth.adpf", padded_truth, 1.0, 1.0)
    code, out, _ = run(capsys, "evaluate", "--pred", tmp_path / "full_out.adpf",
                       "--truth", tmp_path / "padded_truth.adpf", "--border", 4)
    assert json.loads(out)["aggregate"]["psnr_db"] >= 40


def test_calibrate(tmp_path, capsys):
    code, out, _ = run(capsys, "calibrate", "--frames", tmp_path / "dark", "--simulate",
                       "--frames-per-exposure", 1, "--shape", 200, 200, "--out", tmp_path / "cal.json")
    assert code == 0
    res = json.loads(out)
    assert res["mu_r"] == pytest.approx(390, rel=0.01)
    assert json.loads((tmp_path / "cal.json").read_text()) == res


@pytest.mark.parametrize(
    "argv,code,kind",
    [
        (["gen-psf", "--config", "{missing}", "--out", "x.adpf"], 3, "io"),
        (["gen-psf", "--config", "{bad}", "--out", "x.adpf"], 2, "config"),
        (["simulate", "--scene", "{missing}", "--out", "o"], 3, "io"),
    ],
)
def test_error_exit_codes(tmp_path, capsys, argv, code, kind):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"optics": {"focal_length": -1}}))
    argv = [a.format(missing=tmp_path / "none", bad=bad) for a in argv]
    got, out, err = run(capsys, *argv)
    assert got == code
    assert out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"error code={kind} exit={code} message=")


def test_numerical_guard_exit(tmp_path, cfg_path, capsys):
    Image.fromarray(np.zeros((60, 64), np.uint8)).save(tmp_path / "black.png")
    code, _, err = run(capsys, "simulate", "--config", cfg_path, "--scene", tmp_path / "black.png",
                       "--out", tmp_path / "o")
    assert code == 4 and "code=numerical" in err
