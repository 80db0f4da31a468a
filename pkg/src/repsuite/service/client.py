"""Synchronous in-process access to the ASGI service.

``httpx.ASGITransport`` only plugs into the async client, so this
module bridges it to a plain ``httpx.Client``: each request spins up a
private event loop, runs the app, and returns the buffered response.
The command line uses this by default, making every subcommand work
without a running server while exercising the exact same routes.
"""

from __future__ import annotations

import asyncio

import httpx


class SyncASGITransport(httpx.BaseTransport):
    def __init__(self, app) -> None:
        self._app = app

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def _run() -> httpx.Response:
            transport = httpx.ASGITransport(app=self._app)
            try:
                response = await transport.handle_async_request(request)
                await response.aread()
                return response
            finally:
                await transport.aclose()

        response = asyncio.run(_run())
        return httpx.Response(
            status_code=response.status_code,
            headers=response.headers,
            content=response.content,
            request=request,
        )


def in_process_client(app=None) -> httpx.Client:
    """An ``httpx.Client`` whose requests never leave the process."""
    if app is None:
        from .app import create_app

        app = create_app()
    return httpx.Client(
        transport=SyncASGITransport(app), base_url="http://repsuite.internal"
    )
