import numpy as np
import pytest

from data.synthetic import synthetic_scenes
from model.config import ModelConfig
from numerics.params_util import ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return ModelConfig.small()


@pytest.fixture
def patch_config():
    return ModelConfig.small(backbone="patch")


@pytest.fixture
def scenes():
    return synthetic_scenes(6, seed=3, max_neighbors=3, min_neighbors=0)


@pytest.fixture
def image_scenes():
    return synthetic_scenes(4, seed=5, max_neighbors=2, min_neighbors=1, with_image=True, image_size=32)


@pytest.fixture
def eth_file(tmp_path):
    """3 agents over 10 annotated frames (step 10), agent 3 starts late."""
    rows = []
    for k in range(10):
        frame = 100 + 10 * k
        rows.append(f"{frame} 1 {0.5 * k:.2f} 0.00")
        rows.append(f"{frame} 2 0.00 {0.4 * k:.2f}")
        if k >= 4:
            rows.append(f"{frame} 3 {1.0 + k:.2f} {2.0:.2f}")
    path = tmp_path / "eth_fixture.txt"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def sdd_file(tmp_path):
    """Agent 0 pedestrian, 1 biker, 2 pedestrian with a lost row; frames every 12."""
    rows = []
    for k in range(5):
        f = 12 * k
        rows.append(f'0 {10 * k} 0 {10 * k + 10} 10 {f} 0 0 0 "Pedestrian"')
        rows.append(f'1 0 {5 * k} 4 {5 * k + 4} {f} 0 1 0 "Biker"')
        lost = 1 if k == 2 else 0
        rows.append(f'2 100 100 110 {110 + k} {f} {lost} 0 0 "Pedestrian"')
        # off-stride frame, dropped by subsampling
        rows.append(f'0 {10 * k} 0 {10 * k + 10} 10 {f + 6} 0 0 1 "Pedestrian"')
    path = tmp_path / "annotations.txt"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def make_params():
    def build(values, dtype=np.float64):
        params = ModelParams(dtype)
        for name, value in values.items():
            params.add(name, value)
        return params

    return build
