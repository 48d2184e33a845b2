from __future__ import annotations

import pytest
from hypothesis import settings

from pancap.evaluate import Providers
from pancap.fixtures import LEXICON
from pancap.types import EvalConfig

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def cfg() -> EvalConfig:
    return EvalConfig()


@pytest.fixture
def providers() -> Providers:
    return Providers.mock(lexicon=LEXICON)


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture
def acceptance(request):
    """Records one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.acceptance_lines
