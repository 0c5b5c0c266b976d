"""HTTP scoring service.

GET /v1/health reports status and loaded model versions; POST
/v1/score takes multipart `audio` WAV parts (up to 3) plus a `context`
JSON part and returns the same probabilities the CLI scorer produces
for identical inputs, because both call score_inputs below.
"""

from __future__ import annotations

import asyncio
import json
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .audio.dsp import normalize_waveform
from .audio.wavio import read_wav_bytes
from .cohort import is_symptomatic, parse_context_obj
from .errors import (AudioReadError, CoughScreenError, EmptyAudioError,
                     ManifestError, UnsupportedAudioError)
from .inference import ContextScorer, CoughScorer, ensemble
from .nn.checkpoint import load_checkpoint

MAX_AUDIO_PARTS = 3


@dataclass
class ScoringBundle:
    cough: CoughScorer | None = None
    context: ContextScorer | None = None
    cough_version: str | None = None
    context_version: str | None = None

    @property
    def versions(self) -> dict:
        out = {}
        if self.cough_version:
            out["cough"] = self.cough_version
        if self.context_version:
            out["context"] = self.context_version
        return out


def load_bundle(cough_path=None, context_path=None) -> ScoringBundle:
    bundle = ScoringBundle()
    if cough_path is not None:
        ckpt = load_checkpoint(cough_path)
        bundle.cough = CoughScorer.from_checkpoint(ckpt)
        bundle.cough_version = ckpt.version_string
    if context_path is not None:
        ckpt = load_checkpoint(context_path)
        bundle.context = ContextScorer.from_checkpoint(ckpt)
        bundle.context_version = ckpt.version_string
    if bundle.cough is None and bundle.context is None:
        raise ValueError("need at least one checkpoint")
    return bundle


def score_inputs(bundle: ScoringBundle,
                 audio_parts: list[tuple[str, bytes]],
                 context_obj: dict | None) -> dict:
    """Shared scoring path for the CLI and the service.

    Returns the response body minus transport fields. Raises the
    package's error types; HTTP mapping happens in the endpoint.
    """
    if len(audio_parts) > MAX_AUDIO_PARTS:
        raise ValueError(f"at most {MAX_AUDIO_PARTS} audio parts, "
                         f"got {len(audio_parts)}")
    p_cough = None
    p_context = None
    symptomatic = None
    if audio_parts and bundle.cough is not None:
        buffers = []
        for name, blob in audio_parts:
            samples, rate = read_wav_bytes(blob, name=name)
            buffers.append(normalize_waveform(samples, rate, name=name))
        p_cough = bundle.cough.score_buffers(buffers)
    if context_obj is not None:
        record = parse_context_obj(context_obj)
        symptomatic = is_symptomatic(record)
        if bundle.context is not None:
            p_context = bundle.context.score_record(record)
    if p_cough is None and p_context is None:
        raise ValueError("nothing to score: supply audio for the cough "
                         "model and/or a context block for the context "
                         "model")
    p_ens, flag = ensemble(p_cough, p_context)
    return {"p_cough": p_cough, "p_context": p_context,
            "p_ensemble": p_ens, "flag": flag,
            "symptomatic": symptomatic,
            "model_versions": bundle.versions}


def create_app(cough_path=None, context_path=None, max_workers: int = 2,
               audit_log=None, defer_load: bool = False):
    """FastAPI app factory. With defer_load the checkpoints are read on
    startup and /v1/score answers 503 until they are in."""
    paths = (cough_path, context_path)

    @asynccontextmanager
    async def lifespan(app):
        if app.state.bundle is None:
            app.state.bundle = load_bundle(*paths)
        yield

    app = FastAPI(title="cough-and-context screening service",
                  lifespan=lifespan)
    app.state.bundle = None if defer_load else load_bundle(*paths)
    app.state.gate = asyncio.Semaphore(max_workers)

    @app.get("/v1/health")
    async def health():
        bundle = app.state.bundle
        if bundle is None:
            return {"status": "loading", "model_versions": {}}
        return {"status": "ok", "model_versions": bundle.versions}

    @app.post("/v1/score")
    async def score(request: Request):
        bundle = app.state.bundle
        if bundle is None:
            return JSONResponse({"detail": "models still loading"},
                                status_code=503)
        form = await request.form()
        audio_parts = []
        for part in form.getlist("audio"):
            if isinstance(part, str):
                return JSONResponse(
                    {"detail": "audio parts must be file uploads"},
                    status_code=400)
            audio_parts.append((part.filename or "upload.wav",
                                await part.read()))
        context_obj = None
        raw_ctx = form.get("context")
        if raw_ctx is not None:
            if not isinstance(raw_ctx, str):
                raw_ctx = (await raw_ctx.read()).decode("utf-8", "replace")
            try:
                context_obj = json.loads(raw_ctx)
            except json.JSONDecodeError as exc:
                return JSONResponse(
                    {"detail": f"context part is not valid JSON: {exc}"},
                    status_code=400)
            if not isinstance(context_obj, dict):
                return JSONResponse(
                    {"detail": "context part must be a JSON object"},
                    status_code=400)

        started = time.perf_counter()
        loop = asyncio.get_running_loop()
        async with app.state.gate:
            try:
                body = await loop.run_in_executor(
                    None, score_inputs, bundle, audio_parts, context_obj)
            except (AudioReadError, UnsupportedAudioError,
                    EmptyAudioError) as exc:
                return JSONResponse({"detail": str(exc)}, status_code=422)
            except (ManifestError, ValueError) as exc:
                return JSONResponse({"detail": str(exc)}, status_code=400)
            except CoughScreenError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=400)
        body["timing_ms"] = (time.perf_counter() - started) * 1000.0
        if audit_log is not None:
            entry = {"ts": time.time(), "n_audio": len(audio_parts),
                     "has_context": context_obj is not None,
                     "p_ensemble": body["p_ensemble"]}
            with open(audit_log, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")
        return body

    return app


def serve(cough_path=None, context_path=None, host: str = "127.0.0.1",
          port: int = 8000, max_workers: int = 2, audit_log=None):
    import uvicorn
    app = create_app(cough_path, context_path, max_workers=max_workers,
                     audit_log=audit_log)
    uvicorn.run(app, host=host, port=port, log_level="warning")
