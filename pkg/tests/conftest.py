import pytest

from socialmem import EngineConfig, SocialMemory
from socialmem.embedding import HashingEmbedder

SMALL_DIM = 64


@pytest.fixture
def small_config():
    return EngineConfig(dim=SMALL_DIM)


@pytest.fixture
def mem(small_config):
    return SocialMemory(small_config)


@pytest.fixture
def embedder():
    return HashingEmbedder(SMALL_DIM)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
