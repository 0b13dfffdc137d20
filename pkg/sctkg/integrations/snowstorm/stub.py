"""A small terminology server speaking the client's default routes, backed by a directory of
``<conceptId>.json`` bundles (see :py:func:`sctkg.integrations.snowstorm.client.write_fixture`).

Failures can be scripted per concept id: ``failures={id: [500, 500]}`` answers the first two
requests touching that concept with 500 and serves normally afterwards, and
``permanent_failures={id: 503}`` always fails. A concept in ``redirect_loops`` answers with a
redirect to itself.

.. code-block:: python

    with StubServer(create_app(fixture_dir)) as server:
        fetch_all(ServerConfig(base_url=server.url), ids)
"""
import collections
import json
import logging
import os
import pathlib
import socket
import threading
import time
from typing import Iterable, Mapping, Optional, Sequence, Union

from sctkg.integrations.base import require_plugin

try:
    import uvicorn
    from fastapi import FastAPI, HTTPException, Query, Request
except ImportError as e:
    require_plugin(e, ["fastapi", "uvicorn"], "server")

logger = logging.getLogger(__name__)


class StubState:
    def __init__(
        self,
        fixture_dir: Union[str, os.PathLike],
        failures: Optional[Mapping[int, Sequence[int]]] = None,
        permanent_failures: Optional[Mapping[int, int]] = None,
        redirect_loops: Iterable[int] = (),
    ):
        self.fixture_dir = pathlib.Path(fixture_dir)
        self.failures = {cid: collections.deque(codes) for cid, codes in (failures or {}).items()}
        self.permanent_failures = dict(permanent_failures or {})
        self.redirect_loops = frozenset(redirect_loops)
        self.hits: collections.Counter = collections.Counter()
        self._lock = threading.Lock()

    def document(self, concept_id: int, url: str) -> dict:
        with self._lock:
            self.hits[concept_id] += 1
            if concept_id in self.redirect_loops:
                raise HTTPException(status_code=307, headers={"Location": url})
            if concept_id in self.permanent_failures:
                raise HTTPException(status_code=self.permanent_failures[concept_id])
            scripted = self.failures.get(concept_id)
            if scripted:
                raise HTTPException(status_code=scripted.popleft())
        path = self.fixture_dir / f"{concept_id}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"concept {concept_id} not found")
        return json.loads(path.read_text(encoding="utf-8"))


def _page(items: list, offset: int, limit: int) -> dict:
    return {
        "items": items[offset : offset + limit],
        "total": len(items),
        "offset": offset,
        "limit": limit,
    }


def create_app(
    fixture_dir: Union[str, os.PathLike],
    failures: Optional[Mapping[int, Sequence[int]]] = None,
    permanent_failures: Optional[Mapping[int, int]] = None,
    redirect_loops: Iterable[int] = (),
) -> "FastAPI":
    state = StubState(fixture_dir, failures, permanent_failures, redirect_loops)
    app = FastAPI()
    app.state.stub = state

    # list routes first; the branch segment may itself contain slashes
    @app.get("/{branch:path}/concepts/{concept_id}/descriptions")
    def get_descriptions(
        request: Request,
        branch: str,
        concept_id: int,
        offset: int = Query(0, ge=0),
        limit: int = Query(100, ge=1),
    ) -> dict:
        return _page(state.document(concept_id, str(request.url))["descriptions"], offset, limit)

    @app.get("/{branch:path}/concepts/{concept_id}/relationships")
    def get_relationships(
        request: Request,
        branch: str,
        concept_id: int,
        offset: int = Query(0, ge=0),
        limit: int = Query(100, ge=1),
    ) -> dict:
        return _page(state.document(concept_id, str(request.url))["relationships"], offset, limit)

    @app.get("/{branch:path}/concepts/{concept_id}")
    def get_concept(request: Request, branch: str, concept_id: int) -> dict:
        return state.document(concept_id, str(request.url))["concept"]

    return app


def _free_port(host: str) -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind((host, 0))
        return sock.getsockname()[1]


class StubServer:
    """Runs an app with uvicorn on a background thread for the duration of a ``with`` block."""

    def __init__(self, app: "FastAPI", host: str = "127.0.0.1", port: Optional[int] = None):
        self.app = app
        self.host = host
        self.port = port if port is not None else _free_port(host)
        self._server = uvicorn.Server(
            uvicorn.Config(app, host=self.host, port=self.port, log_level="warning")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def __enter__(self) -> "StubServer":
        self._thread.start()
        deadline = time.monotonic() + 10
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError(f"stub server did not start on {self.url}")
            time.sleep(0.01)
        logger.debug("Stub server listening on %s", self.url)
        return self

    def __exit__(self, *exc_info):
        self._server.should_exit = True
        self._thread.join(timeout=10)


def serve(fixture_dir: Union[str, os.PathLike], host: str = "127.0.0.1", port: int = 8080):
    """Blocking; for trying the client by hand."""
    uvicorn.run(create_app(fixture_dir), host=host, port=port)
