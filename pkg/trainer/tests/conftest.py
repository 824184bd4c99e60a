import subprocess
import sys

import pytest


def run_primary(*args):
    cmd = [sys.executable, "-m", "depthpoison", *args]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, f"{' '.join(cmd)}\n{proc.stdout}\n{proc.stderr}"
    return proc.stdout


TOY_SCENE_FLAGS = [
    "--width", "64", "--height", "32", "--focal", "32", "--max-depth", "16",
    "--dist-range", "3.2", "4.5", "--lateral-range", "-0.3", "0.3",
]


@pytest.fixture(scope="session")
def tiny_clean(tmp_path_factory):
    """Six-sample set for fast unit tests."""
    root = tmp_path_factory.mktemp("tiny") / "clean"
    run_primary("scene-gen", "--n", "6", "--seed", "11", "--out", str(root), *TOY_SCENE_FLAGS)
    return root


@pytest.fixture(scope="session")
def tiny_poisoned(tmp_path_factory, tiny_clean):
    root = tmp_path_factory.mktemp("tiny_p") / "poisoned"
    run_primary(
        "poison", "--index", str(tiny_clean), "--rate", "0.34", "--seed", "5",
        "--patch", "8", "--theta-max", "0", "--recolor", "0", "--size-delta", "0",
        "--region-radius", "4", "--strict", "--out", str(root),
    )
    return root
