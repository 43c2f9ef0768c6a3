"""Local HTTP/WebSocket service around a running pipeline.

Endpoints: GET /health, GET /result (latest FrameResult as JSON, 204 before
the first frame), POST /control (operator commands, applied between frames),
WS /stream (interleaved text FrameResult JSON and binary annotated frames:
8-byte little-endian frame index followed by PNG bytes).

PNG encoding and fan-out run on a dedicated broadcaster thread fed by a
latest-wins slot, so subscribers can never back-pressure the pipeline; a
subscriber whose send queue fills up is disconnected instead.
"""

from __future__ import annotations

import asyncio
import io
import json
import struct
import threading
from contextlib import asynccontextmanager
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from PIL import Image

from .ingest import FrameSource, RgbFrame
from .pipeline import FrameResult, Pipeline
from .roi import RoiSpec

SUBSCRIBER_QUEUE_LIMIT = 16

# A subscriber that stops reading also stops answering protocol pings (its
# reader is one loop); the server drops it after this many seconds.
WS_PING_INTERVAL = 0.5
WS_PING_TIMEOUT = 2.0

_CONTROL_KINDS = ("set_roi", "set_mode", "set_smoothing", "pause", "resume")


class PipelineRunner:
    """Owns the pipeline thread and the latest result/frame pair."""

    def __init__(self, pipeline: Pipeline, source: FrameSource,
                 max_frames: Optional[int] = None):
        self.pipeline = pipeline
        self.source = source
        self.max_frames = max_frames
        self.latest: Optional[FrameResult] = None
        self.frames_processed = 0
        self.hub: Optional["BroadcastHub"] = None
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="framebow-pipeline", daemon=True)

    @property
    def frame_size(self) -> tuple[int, int]:
        return self.source.width, self.source.height

    def _emit(self, result: FrameResult, annotated: Optional[RgbFrame]) -> None:
        self.latest = result
        self.frames_processed += 1
        if self.hub is not None and annotated is not None:
            self.hub.submit(result, annotated)

    def _run(self) -> None:
        for _ in self.pipeline.run_stream(
            self.source, max_frames=self.max_frames,
            on_result=self._emit, stop=self._stop.is_set,
        ):
            pass

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self.pipeline.queue_command("resume")  # unblock a paused loop
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)


class BroadcastHub:
    """Latest-wins encode slot plus per-subscriber bounded queues."""

    def __init__(self):
        self._cond = threading.Condition()
        self._slot: Optional[tuple[FrameResult, RgbFrame]] = None
        self._closed = False
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._subscribers: set[asyncio.Queue] = set()
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._broadcast_loop,
                                        name="framebow-broadcast", daemon=True)
        self._started = False

    def attach_loop(self, loop: asyncio.AbstractEventLoop) -> None:
        self._loop = loop
        if not self._started:
            self._started = True
            self._thread.start()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        if self._started and self._thread.is_alive():
            self._thread.join(timeout=2.0)

    # called from the pipeline thread
    def submit(self, result: FrameResult, annotated: RgbFrame) -> None:
        with self._lock:
            has_subscribers = bool(self._subscribers)
        if not has_subscribers:
            return
        with self._cond:
            self._slot = (result, annotated)  # newer frames replace unsent ones
            self._cond.notify()

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_LIMIT)
        with self._lock:
            self._subscribers.add(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        with self._lock:
            self._subscribers.discard(q)

    def _broadcast_loop(self) -> None:
        while True:
            with self._cond:
                while self._slot is None and not self._closed:
                    self._cond.wait(timeout=0.5)
                if self._closed:
                    return
                result, annotated = self._slot
                self._slot = None
            buf = io.BytesIO()
            Image.fromarray(annotated.data).save(buf, format="PNG")
            binary = struct.pack("<Q", result.frame_index) + buf.getvalue()
            text = result.to_json()
            loop = self._loop
            if loop is None or loop.is_closed():
                continue
            with self._lock:
                targets = list(self._subscribers)
            for q in targets:
                loop.call_soon_threadsafe(self._offer, q, (text, binary))

    def _offer(self, q: asyncio.Queue, item: tuple[str, bytes]) -> None:
        try:
            q.put_nowait(item)
        except asyncio.QueueFull:
            # subscriber stopped reading: poison it so its handler disconnects
            self.unsubscribe(q)
            try:
                while True:
                    q.get_nowait()
            except asyncio.QueueEmpty:
                pass
            q.put_nowait(None)


def _parse_control(body: dict, runner: PipelineRunner) -> tuple[str, object, dict]:
    """Validate a control command; returns (kind, payload, echo dict)."""
    kind = body.get("kind")
    if kind not in _CONTROL_KINDS:
        raise ValueError(f"unknown control kind {kind!r}")
    if kind == "set_roi":
        try:
            x, y = int(body["x"]), int(body["y"])
            w, h = int(body["w"]), int(body["h"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"set_roi needs integer x, y, w, h: {exc}") from exc
        if w <= 0 or h <= 0:
            raise ValueError("set_roi needs positive w and h")
        fw, fh = runner.frame_size
        clamped = RoiSpec(x, y, w, h).clamped(fw, fh)
        echo = {"kind": kind, "x": clamped.x, "y": clamped.y,
                "w": clamped.width, "h": clamped.height}
        return kind, clamped, echo
    if kind == "set_mode":
        mode = body.get("mode")
        if mode not in ("two", "three"):
            raise ValueError(f"mode must be 'two' or 'three', got {mode!r}")
        if not runner.pipeline.has_mode(mode):
            raise ValueError(f"no {mode}-category model is loaded")
        return kind, mode, {"kind": kind, "mode": mode}
    if kind == "set_smoothing":
        try:
            alpha = float(body["alpha"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"set_smoothing needs a numeric alpha: {exc}") from exc
        if not (0.0 <= alpha < 1.0):
            raise ValueError("alpha must lie in [0, 1)")
        return kind, alpha, {"kind": kind, "alpha": alpha}
    return kind, None, {"kind": kind}


def create_app(runner: PipelineRunner) -> FastAPI:
    hub = BroadcastHub()
    runner.hub = hub

    @asynccontextmanager
    async def lifespan(_app):
        hub.attach_loop(asyncio.get_running_loop())
        yield
        hub.close()

    app = FastAPI(title="framebow", docs_url=None, redoc_url=None, lifespan=lifespan)
    # the viewer is served statically from elsewhere; this is a loopback
    # service with no auth, so a wide-open CORS policy costs nothing
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "mode": runner.pipeline.mode,
            "frames_processed": runner.frames_processed,
        }

    @app.get("/result")
    async def result():
        latest = runner.latest
        if latest is None:
            return Response(status_code=204)
        return JSONResponse(latest.to_dict())

    @app.post("/control")
    async def control(request: Request):
        try:
            body = json.loads(await request.body())
            if not isinstance(body, dict):
                raise ValueError("control body must be a JSON object")
            kind, payload, echo = _parse_control(body, runner)
        except (ValueError, json.JSONDecodeError) as exc:
            return PlainTextResponse(str(exc), status_code=400)
        runner.pipeline.queue_command(kind, payload)
        return JSONResponse({"applied": echo})

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        q = hub.subscribe()
        try:
            while True:
                item = await q.get()
                if item is None:
                    break  # evicted as a slow consumer
                text, binary = item
                await ws.send_text(text)
                await ws.send_bytes(binary)
        except (WebSocketDisconnect, RuntimeError):
            pass  # client went away (or was dropped by the ping keepalive)
        finally:
            hub.unsubscribe(q)
            try:
                await ws.close()
            except RuntimeError:
                pass

    return app


def serve(runner: PipelineRunner, bind: str = "127.0.0.1:8750") -> None:
    """Run the service until interrupted (blocking)."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    app = create_app(runner)
    runner.start()
    try:
        uvicorn.run(
            app, host=host or "127.0.0.1", port=int(port), log_level="warning",
            ws_ping_interval=WS_PING_INTERVAL, ws_ping_timeout=WS_PING_TIMEOUT,
        )
    finally:
        runner.stop()
