"""WebSocket telemetry/control endpoint and static UI hosting."""

from __future__ import annotations

import asyncio
import queue
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from ..control import Calibration
from ..neural import load_model
from .pipeline import PipelineConfig, PipelineEngine, PipelineRunner
from .sources import make_source

WS_SCHEMA = "bmui-ws/1"


def build_engine(cfg: PipelineConfig) -> PipelineEngine:
    import json

    regressor = load_model(cfg.regressor_path)
    classifier = load_model(cfg.classifier_path)
    calib = Calibration.from_dict(
        json.loads(Path(cfg.calibration_path).read_text(encoding="utf-8"))
    )
    source = make_source(cfg.source)
    return PipelineEngine(source, regressor, classifier, calib, chunk_ms=cfg.chunk_ms)


def create_app(runner: PipelineRunner, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="bmui")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        sub = runner.subscribe()
        loop = asyncio.get_running_loop()

        async def pump_telemetry():
            while True:
                frame = await loop.run_in_executor(None, _get_frame, sub)
                if frame is None:
                    continue
                await ws.send_json(frame.to_dict())

        pump = asyncio.create_task(pump_telemetry())
        try:
            while True:
                msg = await ws.receive_json()
                reply = await loop.run_in_executor(None, runner.submit_control, msg)
                await ws.send_json(reply)
        except WebSocketDisconnect:
            pass
        except Exception:
            pass
        finally:
            pump.cancel()
            runner.unsubscribe(sub)

    if ui_dir is not None and ui_dir.exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def _get_frame(sub: queue.Queue):
    try:
        return sub.get(timeout=0.25)
    except queue.Empty:
        return None


def serve(cfg: PipelineConfig, ui_dir: Path | None = None):
    """Run the paced pipeline and the WebSocket server until interrupted."""
    import uvicorn

    engine = build_engine(cfg)
    runner = PipelineRunner(engine, paced=not cfg.fast)
    runner.start()
    app = create_app(runner, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host="0.0.0.0", port=cfg.port, log_level="warning")
    finally:
        runner.stop()
