import numpy as np
import pytest

from depthpoison.scenegen import SceneParams, generate_dataset, generate_scene


@pytest.fixture(scope="session")
def scene():
    """One default 256x512 scene reused by read-only tests."""
    return generate_scene(SceneParams())


@pytest.fixture(scope="session")
def small_params():
    # small frames keep per-test generation cheap
    return SceneParams(image_width=192, image_height=96, focal_length=96.0, vehicle_distance=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def clean_dataset(tmp_path_factory, small_params):
    """A 30-sample dataset on disk, shared across poisoning tests."""
    root = tmp_path_factory.mktemp("clean_ds")
    index = generate_dataset(
        30,
        small_params,
        {"vehicle_distance": (6.0, 30.0), "vehicle_lateral_offset": (-1.5, 1.5)},
        seed=99,
        root=root,
    )
    return index
