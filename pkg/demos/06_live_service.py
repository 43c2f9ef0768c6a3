#!/usr/bin/env python3
"""Drive the HTTP/WebSocket service end to end from Python.

Starts the pipeline and service in-process, subscribes to the stream the way
the browser viewer does, repositions the ROI over HTTP, and shows the
clamped echo plus the confirming results.
"""

import json
import socket
import struct
import tempfile
import threading
import time
from pathlib import Path

import httpx
import uvicorn
from websockets.sync.client import connect

from framebow import ArtifactBundle, Pipeline, PipelineConfig, SyntheticSource, TrainConfig, VocabTrainConfig, synth_dataset, train_from_directory
from framebow.service import PipelineRunner, create_app

root = Path(tempfile.mkdtemp(prefix="framebow-demo-"))
synth_dataset(root / "ds", per_class=8, seed=2, size=(128, 128))
art = train_from_directory(root / "ds", root / "art",
                           TrainConfig(mode="three", seed=2,
                                       vocab=VocabTrainConfig(branching=6, depth=2, seed=2)))
bundle = ArtifactBundle.load(art.vocab_path, art.scaler_path, art.model_path)

pipeline = Pipeline({"three": bundle}, PipelineConfig(mode="three"))
source = SyntheticSource("B", seed=5, width=320, height=240, nominal_fps=30)
runner = PipelineRunner(pipeline, source)
app = create_app(runner)

sock = socket.socket()
sock.bind(("127.0.0.1", 0))
port = sock.getsockname()[1]
server = uvicorn.Server(uvicorn.Config(app, log_level="error"))
threading.Thread(target=server.run, kwargs={"sockets": [sock]}, daemon=True).start()
runner.start()
base = f"http://127.0.0.1:{port}"
while True:
    try:
        if httpx.get(base + "/health", timeout=0.5).status_code == 200:
            break
    except Exception:
        time.sleep(0.05)
print("service:", httpx.get(base + "/health").json())

with connect(base.replace("http", "ws") + "/stream") as ws:
    # each frame arrives as a JSON result followed by prefixed PNG bytes
    for _ in range(3):
        result = json.loads(ws.recv())
        binary = ws.recv()
        (index,) = struct.unpack("<Q", binary[:8])
        print(f"frame {result['frame_index']} (binary index {index}): "
              f"label {result['label']}, png {len(binary)-8} bytes, roi {result['roi']}")

    # reposition the ROI past the right edge: the service clamps it
    response = httpx.post(base + "/control",
                          json={"kind": "set_roi", "x": 900, "y": 10, "w": 200, "h": 200})
    print("\nset_roi x=900 ->", response.json())

    deadline = time.time() + 5
    while time.time() < deadline:
        message = ws.recv()
        if isinstance(message, str):
            roi = json.loads(message)["roi"]
            if roi["x"] != 60:  # default centered position for 320x240
                print("stream confirms applied roi:", roi)
                break

runner.stop()
server.should_exit = True
print("done")
