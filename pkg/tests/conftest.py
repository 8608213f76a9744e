import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def tiny_dataset():
    from ovdet.data.synthetic import SyntheticSpec, generate_synthetic_dataset

    return generate_synthetic_dataset(SyntheticSpec(num_images=24, eval_images=6, seed=5))


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory, tiny_dataset):
    from ovdet.data.synthetic import write_synthetic_dataset

    out = tmp_path_factory.mktemp("synthetic")
    write_synthetic_dataset(tiny_dataset, out)
    return out
