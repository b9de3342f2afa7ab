import numpy as np
import pytest

from antidazzle.calib import (
    EXPOSURE_LADDER,
    estimate_read_noise,
    fit_photon_coefficients,
    histogram_divergence,
    load_dark_frames,
    simulate_dark_frames,
    validate,
    write_dark_frames,
)
from antidazzle.rng import stream
from antidazzle.sensor import NoiseSwitches, PhotonModel, SensorModel, sample_photons


def test_ladder():
    assert EXPOSURE_LADDER == (0.001, 0.01, 0.1, 1.0)


def test_read_noise_roundtrip_1e6_pixels():
    s = SensorModel()
    frames = simulate_dark_frames(s, (1000, 1000), 1, seed=3)
    res = estimate_read_noise(frames, s)
    assert res.mu_r == pytest.approx(390.0, rel=0.01)
    for t in EXPOSURE_LADDER:
        assert res.sigma_r_per_exposure[t] == pytest.approx(10.5, rel=0.01)


def test_averaging_and_per_frame_correction():
    s = SensorModel()
    frames = simulate_dark_frames(s, (200, 200), 16, seed=4, ladder=(0.001,))
    lit = estimate_read_noise(frames, s, ladder=(0.001,))
    cor = estimate_read_noise(frames, s, ladder=(0.001,), per_frame=True)
    assert lit.sigma_r_per_exposure[0.001] == pytest.approx(10.5 / 4, rel=0.05)
    assert cor.sigma_r_per_exposure[0.001] == pytest.approx(10.5, rel=0.05)


@pytest.mark.parametrize("n", [1, 4, 16, 20])
def test_std_of_mean_shrinks_with_sqrt_n(n):
    s = SensorModel(gain=1.0)
    base = simulate_dark_frames(s, (300, 300), 1, seed=5, ladder=(0.001,))[0.001][0].std()
    avg = np.mean(simulate_dark_frames(s, (300, 300), n, seed=6, ladder=(0.001,))[0.001], axis=0).std()
    assert avg == pytest.approx(base / np.sqrt(n), rel=0.10)


def test_zero_noise_frames():
    s = SensorModel(read_noise_std=0.0, dark_current_mean=0.0)
    frames = simulate_dark_frames(s, (100, 100), 20, seed=7)
    res = estimate_read_noise(frames, s)
    for sigma in res.sigma_r_per_exposure.values():
        assert sigma * s.gain < 0.3


def test_estimate_errors():
    s = SensorModel()
    with pytest.raises(ValueError, match="bias"):
        estimate_read_noise({0.1: [np.zeros((4, 4))]}, s)
    with pytest.raises(ValueError, match="inconsistent"):
        estimate_read_noise({0.001: [np.zeros((4, 4)), np.zeros((4, 5))]}, s)


def test_histogram_divergence_cases():
    a = np.arange(1000) % 50
    assert histogram_divergence(a, a) == 0.0
    assert histogram_divergence(np.zeros(100), np.full(100, 100.0)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        histogram_divergence(np.array([]), a)


def test_histogram_bootstrap_oracle():
    s = SensorModel()
    f = simulate_dark_frames(s, (1000, 1000), 2, seed=8, ladder=(0.1,))[0.1]
    score = histogram_divergence(f[0], f[1])
    # self-distance bootstrap: resample one frame against itself
    rng = np.random.default_rng(0)
    flat = f[0].ravel()
    boot = [histogram_divergence(rng.choice(flat, flat.size), rng.choice(flat, flat.size)) for _ in range(40)]
    assert score < np.percentile(boot, 99) * 1.5


def test_files_roundtrip_and_validate(tmp_path):
    s = SensorModel()
    frames = simulate_dark_frames(s, (64, 64), 3, seed=9)
    write_dark_frames(tmp_path, frames)
    assert (tmp_path / "0.001_0.png").exists()
    loaded = load_dark_frames(tmp_path)
    assert sorted(loaded) == list(EXPOSURE_LADDER)
    np.testing.assert_array_equal(loaded[0.1][2], frames[0.1][2])
    res = validate(estimate_read_noise(loaded, s), loaded, s, seed=1)
    assert set(res.histogram_divergences) == set(EXPOSURE_LADDER)
    assert all(v < 0.1 for v in res.histogram_divergences.values())
    assert '"0.001"' in res.to_json()


def test_photon_coefficient_fit():
    levels = np.array([50.0, 200.0, 800.0, 3000.0, 10000.0])
    stds = []
    for i, p in enumerate(levels):
        draws = sample_photons(np.full(200_000, p), PhotonModel(0.2, 1.0), stream(10, i))
        stds.append(draws.std())
    c1, c2 = fit_photon_coefficients(levels, stds)
    assert c1 == pytest.approx(0.2, rel=0.02)
    assert c2 == pytest.approx(1.0, rel=0.1)
