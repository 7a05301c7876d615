import numpy as np
import pytest

import linescan as ls


@pytest.fixture(scope="session")
def sensor():
    return ls.mlx75306_preset()


@pytest.fixture(scope="session")
def pitch_mm(sensor):
    return sensor.pixel_pitch * 1e-3


@pytest.fixture
def wire_scene():
    def make(diameter=3.0, center=0.0, distance=20.0, motion=None):
        return ls.SceneSetup(
            object_distance=distance,
            occluder=ls.Occluder(center_x=center, diameter=diameter),
            motion=motion)
    return make


@pytest.fixture
def quiet_cfg():
    """Noise-free Monte Carlo config for deterministic optics checks."""
    def make(rays=10_000, seed=0):
        return ls.RenderConfig(rays_per_pixel=rays, rng_seed=seed,
                               add_sensor_noise=False)
    return make


def synth_frame(values, frame_index=0, timestamp=0.0):
    return ls.LineImage(frame_index=frame_index, timestamp=timestamp,
                        values=np.asarray(values))
