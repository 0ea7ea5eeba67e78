import pytest

from blowup_bounds import QuadratureSpec, compute_constants, disk


@pytest.fixture(scope="session")
def unit_disk():
    return disk(1.0)


@pytest.fixture(scope="session")
def default_spec():
    return QuadratureSpec()


@pytest.fixture(scope="session")
def disk_constants(unit_disk, default_spec):
    # certified b1/B1 for the unit disk; shared because it costs ~10 s
    return compute_constants(unit_disk, default_spec)
