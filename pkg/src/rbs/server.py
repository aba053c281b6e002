"""HTTP inference service over a single loaded surrogate model.

Endpoints: GET /meta, POST /infer, POST /infer_batch, GET /mode/{k}.
Responses carry f64 values either as JSON numbers (shortest round-trip
decimal form, so parsing them back yields the identical double) or, when
the client sends ``Accept: application/octet-stream``, as raw
little-endian f64 bodies with metadata moved into X- headers.

Request bodies are parsed by hand: syntactically broken JSON is 400,
well-formed JSON with wrong content is 422 with the offending component
named.  The model is immutable, so every handler is a pure function of
the request.
"""

from __future__ import annotations

import json
import math
import socket
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response

from .errors import RuntimeBindError
from .pipeline import SurrogateModel, infer, is_extrapolated, load_model

BATCH_CAP = 1024


class _Invalid(Exception):
    """Semantically invalid request content (-> 422)."""


def _jsonify(obj, status: int = 200) -> Response:
    return Response(content=json.dumps(obj), status_code=status,
                    media_type="application/json")


def _error(status: int, detail: str) -> Response:
    return _jsonify({"detail": detail}, status=status)


def _wants_binary(request: Request) -> bool:
    return "application/octet-stream" in request.headers.get("accept", "")


def _parse_infer_body(obj, d_lambda: int, where: str = "") -> tuple[float, list[float]]:
    if not isinstance(obj, dict):
        raise _Invalid(f"{where}body must be a JSON object")
    for key in ("t", "lambda"):
        if key not in obj:
            raise _Invalid(f"{where}missing field {key!r}")
    t = obj["t"]
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        raise _Invalid(f"{where}t must be a number")
    if not math.isfinite(t):
        raise _Invalid(f"{where}t is not finite")
    lam = obj["lambda"]
    if not isinstance(lam, list):
        raise _Invalid(f"{where}lambda must be an array")
    if len(lam) != d_lambda:
        raise _Invalid(
            f"{where}lambda has {len(lam)} components, expected {d_lambda}")
    for i, v in enumerate(lam):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise _Invalid(f"{where}lambda[{i}] must be a number")
        if not math.isfinite(v):
            raise _Invalid(f"{where}lambda[{i}] is not finite")
    return float(t), [float(v) for v in lam]


def _run_one(model: SurrogateModel, t: float, lam: list[float]) -> tuple[np.ndarray, int, bool]:
    t0 = time.perf_counter_ns()
    field = infer(model, t, lam)
    latency_us = (time.perf_counter_ns() - t0) // 1000
    return field, int(latency_us), is_extrapolated(model, t, lam)


def _meta_payload(model: SurrogateModel) -> dict:
    meta = model.metadata
    ranges = [[float(lo), float(hi)] for lo, hi in meta["input_ranges"]]
    payload = {
        "n": model.n,
        "r": model.r,
        "d_lambda": model.d_lambda,
        "parameter_names": meta.get(
            "parameter_names", [f"p{i}" for i in range(1, model.d_lambda + 1)]),
        "t_range": ranges[0],
        "param_ranges": ranges[1:],
        "input_ranges": ranges,
        "energy_threshold": float(meta["energy_threshold"]),
        "e": model.e,
        "e_k": list(model.e_k),
    }
    if "grid_side" in meta:
        payload["grid_side"] = int(meta["grid_side"])
    return payload


def create_app(
    model: SurrogateModel,
    batch_cap: int = BATCH_CAP,
    cors: str | None = "*",
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="reduced-basis surrogate server", docs_url=None, redoc_url=None)
    if cors:
        app.add_middleware(
            CORSMiddleware, allow_origins=[cors], allow_methods=["*"],
            allow_headers=["*"], expose_headers=["*"])

    @app.get("/meta")
    async def meta() -> Response:
        return _jsonify(_meta_payload(model))

    @app.post("/infer")
    async def infer_one(request: Request) -> Response:
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return _error(400, f"malformed JSON: {exc}")
        try:
            t, lam = _parse_infer_body(body, model.d_lambda)
        except _Invalid as exc:
            return _error(422, str(exc))
        field, latency_us, extrapolated = _run_one(model, t, lam)
        if _wants_binary(request):
            return Response(
                content=field.astype("<f8", copy=False).tobytes(),
                media_type="application/octet-stream",
                headers={"X-Latency-Us": str(latency_us),
                         "X-Extrapolated": "1" if extrapolated else "0"})
        return _jsonify({"field": field.tolist(), "latency_us": latency_us,
                         "extrapolated": extrapolated})

    @app.post("/infer_batch")
    async def infer_many(request: Request) -> Response:
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return _error(400, f"malformed JSON: {exc}")
        if not isinstance(body, list):
            return _error(422, "body must be a JSON array of requests")
        if len(body) > batch_cap:
            return _error(413, f"batch size {len(body)} exceeds cap {batch_cap}")
        parsed = []
        try:
            for i, item in enumerate(body):
                parsed.append(_parse_infer_body(item, model.d_lambda,
                                                where=f"request[{i}]: "))
        except _Invalid as exc:
            return _error(422, str(exc))
        results = [_run_one(model, t, lam) for t, lam in parsed]
        if _wants_binary(request):
            return Response(
                content=b"".join(f.astype("<f8", copy=False).tobytes()
                                 for f, _, _ in results),
                media_type="application/octet-stream",
                headers={
                    "X-Batch-Count": str(len(results)),
                    "X-Latency-Us": str(sum(lat for _, lat, _ in results)),
                    "X-Extrapolated": ",".join(
                        "1" if ex else "0" for _, _, ex in results)})
        return _jsonify([
            {"field": f.tolist(), "latency_us": lat, "extrapolated": ex}
            for f, lat, ex in results])

    @app.get("/mode/{k}")
    async def mode(k: int, request: Request) -> Response:
        if not 1 <= k <= model.r:
            return _error(404, f"mode {k} out of range 1..{model.r}")
        column = np.ascontiguousarray(model.basis.modes[:, k - 1])
        if _wants_binary(request):
            return Response(content=column.astype("<f8", copy=False).tobytes(),
                            media_type="application/octet-stream")
        return _jsonify({"mode": column.tolist()})

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True))

    return app


def _probe_bind(host: str, port: int) -> None:
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
            s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            s.bind((host, port))
    except OSError as exc:
        raise RuntimeBindError(f"cannot bind {host}:{port}: {exc}") from exc


def run_server(
    model_path: str,
    bind: str = "127.0.0.1:8000",
    batch_cap: int = BATCH_CAP,
    cors: str | None = "*",
    static_dir: str | None = None,
) -> None:
    """Load the model, bind, and serve until interrupted."""
    import uvicorn

    host, _, port_s = bind.rpartition(":")
    if not host or not port_s.isdigit():
        raise ValueError(f"bind must look like host:port, got {bind!r}")
    port = int(port_s)
    model = load_model(model_path)
    _probe_bind(host, port)
    app = create_app(model, batch_cap=batch_cap, cors=cors, static_dir=static_dir)
    print(f"serving on http://{host}:{port} "
          f"(n={model.n}, r={model.r}, d_lambda={model.d_lambda})", flush=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")
