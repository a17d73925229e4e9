import numpy as np
import pytest

from blisscam.scene import generate_sequence, make_default_scene


@pytest.fixture(scope="session")
def small_scene():
    return make_default_scene(width=160, height=120, n_frames=24, seed=1,
                              pupil_radius=10.0, iris_radius=24.0, eye_radius=50.0,
                              amplitude_x=20.0, amplitude_y=12.0)


@pytest.fixture(scope="session")
def small_sequence(small_scene):
    return generate_sequence(small_scene, 24, seed=1)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
