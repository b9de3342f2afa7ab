import numpy as np
import pytest
from PIL import Image

from antidazzle.optics import OpticsConfig, sensor_psf_pair
from antidazzle.sensor import SensorModel

# A 1024-point pupil with a 4x coarser pitch keeps the default focal pitch
# (and the 2x oversampled aperture) at 1/16 of the cost.
SMALL_OPTICS = OpticsConfig(pupil_dims=(1024, 1024), pupil_pitch=(1.496e-5, 1.496e-5))


@pytest.fixture(scope="session")
def small_optics():
    return SMALL_OPTICS


@pytest.fixture(scope="session")
def small_pair():
    return sensor_psf_pair(SMALL_OPTICS, SMALL_OPTICS.lambda_b, 5.4e-6)


@pytest.fixture(scope="session")
def tiny_pair():
    """Sensor-pitch pair cropped to 31 px, for fast pipeline tests."""
    return sensor_psf_pair(SMALL_OPTICS, SMALL_OPTICS.lambda_b, 5.4e-6, max_side=31)


@pytest.fixture
def tiny_sensor():
    return SensorModel(resolution=(48, 40))


def smooth_scene(rng, rows, cols, levels=255):
    y, x = np.mgrid[:rows, :cols]
    fx, fy = rng.uniform(3, 15, 2)
    img = 0.5 + 0.35 * np.sin(x / fx + rng.uniform(0, 6)) * np.cos(y / fy) + rng.normal(0, 0.05, (rows, cols))
    return np.clip(img, 0, 1)


@pytest.fixture
def scene_dir(tmp_path):
    rng = np.random.default_rng(11)
    root = tmp_path / "scenes"
    root.mkdir()
    for i, (r, c) in enumerate([(60, 70), (64, 64), (80, 90)]):
        img = (smooth_scene(rng, r, c) * 255).round().astype(np.uint8)
        Image.fromarray(img).save(root / f"scene{i}.png")
    return root


# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
