import json
from dataclasses import replace

import numpy as np
import pytest

from antidazzle.errors import ConfigError, DataIOError
from antidazzle.io import read_adpf
from antidazzle.sensor import NoiseSwitches, SensorModel
from antidazzle.synthesis import (
    PRESETS,
    DatasetConfig,
    SampleSpec,
    SceneInfo,
    SceneStore,
    apply_preset,
    laser_sigma,
    sample_spec,
    synthesize_dataset,
    synthesize_sample,
    write_sample,
)

from conftest import SMALL_OPTICS, smooth_scene

SCENES = [SceneInfo("a", 3000, 3000), SceneInfo("b", 2600, 2800)]
SENSOR = SensorModel()


def test_sample_spec_deterministic_and_in_range():
    cfg = DatasetConfig()
    a = sample_spec(cfg, 5, 99, SCENES, SENSOR, 0.11)
    assert a == sample_spec(cfg, 5, 99, SCENES, SENSOR, 0.11)
    assert a != sample_spec(cfg, 6, 99, SCENES, SENSOR, 0.11)
    for i in range(200):
        s = sample_spec(cfg, i, 1, SCENES, SENSOR, 0.11)
        assert 0 <= s.alpha_l <= 2e6
        assert 0.3 <= s.alpha_b <= 0.7
        assert 0 <= s.c1 <= 0.25 and 0.9 <= s.c2 <= 1.1
        assert 350 <= s.read_noise_mean <= 400 and 10 <= s.read_noise_std <= 11
        assert s.dark_current_mean >= 0 and s.exposure > 0
        x0, y0, w, h = s.crop_rect
        scene = next(sc for sc in SCENES if sc.scene_id == s.scene_id)
        assert (w, h) == SENSOR.resolution
        assert 0 <= x0 <= scene.cols - w and 0 <= y0 <= scene.rows - h


def test_alpha_l_table_monte_carlo():
    cfg = DatasetConfig()
    table = cfg.alpha_l_table()
    assert table.size == 10000 and table[0] == 0 and table[-1] == 2e6
    draws = np.array([sample_spec(cfg, i, 3, SCENES, SENSOR, 0.11).alpha_l for i in range(100_000)])
    assert draws.min() >= 0 and draws.max() <= 2e6
    assert draws.mean() == pytest.approx(1e6, rel=0.02)
    assert np.isin(draws, table).all()


def test_laser_direction_spread():
    cfg = DatasetConfig()
    su, sv = laser_sigma(cfg, SENSOR, 0.11)
    # 3 sigma of the focal shift is 36% of the sensor half-width
    assert 3 * su * 0.11 == pytest.approx(0.36 * 2532 * 5.4e-6 / 2)
    n = np.array([sample_spec(cfg, i, 8, SCENES, SENSOR, 0.11).direction for i in range(4000)])
    assert n[:, 0].std() == pytest.approx(su, rel=0.05)
    assert n[:, 1].std() == pytest.approx(sv, rel=0.05)


def test_presets_match_table():
    expect = {"E1": (0, 0.8, 0.01), "E2": (3e4, 0.6, 0.03), "M": (3e5, 0.4, 0.05),
              "H1": (1e6, 0.3, 0.10), "H2": (1.5e6, 0.2, 0.20)}
    assert {k: (p.alpha_l, p.alpha_b, p.c1) for k, p in PRESETS.items()} == expect
    s = sample_spec(DatasetConfig(preset="H2"), 0, 0, SCENES, SENSOR, 0.11)
    assert (s.alpha_l, s.alpha_b, s.c1, s.preset) == (1.5e6, 0.2, 0.2, "H2")
    assert (s.c2, s.read_noise_mean, s.read_noise_std, s.dark_current_mean) == (1.0, 390.0, 10.5, 0.002)
    with pytest.raises(ConfigError):
        DatasetConfig(preset="X9")


def _spec(**kw):
    base = dict(scene_id="s", crop_rect=(2, 3, 48, 40), alpha_b=0.5, alpha_l=0.0, direction=(0.0, 0.0),
                exposure=0.1, c1=0.2, c2=1.0, read_noise_mean=390.0, read_noise_std=10.5,
                dark_current_mean=0.002, seed=17)
    base.update(kw)
    return SampleSpec(**base)


def test_zero_laser_only_background(tiny_pair, tiny_sensor):
    scene = smooth_scene(np.random.default_rng(0), 50, 60)
    res = synthesize_sample(_spec(), tiny_pair, tiny_pair, tiny_sensor, SMALL_OPTICS, scene, (24, 20))
    assert not res.irradiance.laser.any()
    assert res.meta["laser_energy"] == 0.0
    assert res.coded.counts.shape == (40, 48)
    assert res.coded_work.shape == (24, 20) and res.truth_work.shape == (24, 20)


def test_saturation_grows_with_laser(tiny_pair, tiny_sensor):
    scene = smooth_scene(np.random.default_rng(1), 50, 60)
    fractions = []
    for a in [1e1, 1e2, 1e3, 1e4, 1e5, 1e6]:
        res = synthesize_sample(_spec(alpha_l=a), tiny_pair, tiny_pair, tiny_sensor, SMALL_OPTICS, scene,
                                (24, 20), NoiseSwitches.off())
        fractions.append(res.meta["saturated_fraction"])
    assert all(b >= a for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] > fractions[0]


def test_crop_outside_scene(tiny_pair, tiny_sensor):
    scene = np.full((30, 30), 0.5)
    with pytest.raises(DataIOError):
        synthesize_sample(_spec(), tiny_pair, tiny_pair, tiny_sensor, SMALL_OPTICS, scene)


def test_sidecar_reproduces_spec(tmp_path, tiny_pair, tiny_sensor):
    scene = smooth_scene(np.random.default_rng(2), 50, 60)
    spec = _spec(alpha_l=1234.5678, direction=(1.1e-5, -2.3e-5))
    res = synthesize_sample(spec, tiny_pair, tiny_pair, tiny_sensor, SMALL_OPTICS, scene, (24, 20))
    rec = write_sample(res, 3, tmp_path, 1e-5, 633e-9)
    side = json.loads((tmp_path / "000003.json").read_text())
    assert SampleSpec.from_dict(side["spec"]) == spec
    assert SampleSpec.from_dict(rec["spec"]) == spec
    irr, pitch, _ = read_adpf(tmp_path / "000003_irradiance.adpf")
    assert pitch == 1e-5 and irr.ndim == 2


def test_scene_store_errors(tmp_path, scene_dir):
    store = SceneStore(scene_dir)
    assert store.ids() == ["scene0", "scene1", "scene2"]
    assert store.info()[0] == SceneInfo("scene0", 60, 70)
    with pytest.raises(DataIOError):
        store.load("missing")
    with pytest.raises(DataIOError):
        SceneStore(tmp_path / "nowhere")
    with pytest.raises(DataIOError):
        sample_spec(DatasetConfig(), 0, 0, [SceneInfo("x", 10, 10)], SENSOR, 0.11)


def test_dataset_jobs_independent(tmp_path, scene_dir, tiny_pair, tiny_sensor):
    ds = DatasetConfig(work_dims=(24, 24), padded_dims=(32, 32))
    args = (SceneStore(scene_dir), SMALL_OPTICS, tiny_sensor, ds, tiny_pair)
    m1, h1 = synthesize_dataset(5, 21, tmp_path / "a", *args, jobs=1)
    m2, h2 = synthesize_dataset(5, 21, tmp_path / "b", *args, jobs=2)
    assert h1 == h2
    assert m1.read_bytes() == m2.read_bytes()
    header = json.loads(m1.read_text().splitlines()[0])
    psf = read_adpf(tmp_path / "a" / header["files"]["psf_coded"]["path"])[0]
    assert header["pad_per_side"] >= psf.shape[0]
    for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
