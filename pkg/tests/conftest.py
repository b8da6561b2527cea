import numpy as np
import pytest

from peprank.masses import MassTable, default_mass_table


@pytest.fixture(scope="session")
def table() -> MassTable:
    return default_mass_table()


@pytest.fixture()
def tiny_table() -> MassTable:
    return MassTable({"G": 57.02146, "A": 71.03711})


def random_table(rng: np.random.Generator, n_tokens: int = 6) -> MassTable:
    """A table of synthetic tokens with random positive masses."""
    masses = rng.uniform(40.0, 200.0, size=n_tokens)
    return MassTable({f"t{i}": float(m) for i, m in enumerate(masses)})
