import pytest

from bundle_factories import random_bundle


@pytest.fixture
def small_bundle():
    return random_bundle()
