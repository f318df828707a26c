import pytest
from hypothesis import settings

from fleetscan.model import FleetConfig, Instance

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def square_corners():
    return Instance(100.0, 100.0, ((0, 0), (100, 0), (100, 100), (0, 100)), FleetConfig(2, 60.0, 4.0))
