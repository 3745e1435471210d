from pathlib import Path

import pytest

from msd.instance import generate_synthetic, load_instance

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def small4():
    return load_instance(DATA_DIR / "small4.json")


@pytest.fixture(scope="session")
def seeded():
    """A handful of small generated instances for cross-checking."""
    return [
        generate_synthetic({"seed": s, "n_lines": 2, "trips_per_line": 6,
                            "mesh_dims": (3, 3)})
        for s in range(6)
    ]
