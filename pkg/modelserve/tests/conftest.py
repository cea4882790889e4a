"""Protocol-suite fixtures.

By default the suite runs in process against the echo server.  Point
MODELSERVE_URL at a live instance to run the same checks over the wire.
"""

from __future__ import annotations

import os

import httpx
import pytest
from fastapi.testclient import TestClient

from modelserve.app import create_app
from modelserve.config import ServerConfig

ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{name}: {verdict}")


LIVE_URL = os.environ.get("MODELSERVE_URL")

local_only = pytest.mark.skipif(
    LIVE_URL is not None,
    reason="exercises server internals; not runnable against a live URL")


@pytest.fixture(scope="session")
def client():
    if LIVE_URL:
        with httpx.Client(base_url=LIVE_URL, timeout=10.0) as c:
            yield c
    else:
        with TestClient(create_app(ServerConfig())) as c:
            yield c
