from sctkg.testing import pytest_generate_tests  # noqa: F401
