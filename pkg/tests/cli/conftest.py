import logging

import pytest

logger = pytest.importorskip("loguru").logger


@pytest.fixture(autouse=True)
def reset_logging():
    """The CLI reconfigures loguru and the root logger on every invocation."""
    yield
    logger.remove()
    logging.root.handlers.clear()
