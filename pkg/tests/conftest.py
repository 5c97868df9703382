import pytest

from hybrid_ik import bundled_chain


@pytest.fixture(scope="session")
def nicol():
    return bundled_chain()
