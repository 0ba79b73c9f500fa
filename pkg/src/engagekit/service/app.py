"""HTTP wrapper around the operation handlers.

Long-running operations (train, train-ordinal) execute synchronously in
the request; this service is meant for single-tenant batch use, not for
serving many concurrent clients.
"""

from __future__ import annotations

import functools

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import (ConfigError, DivergenceError, EngageError, FormatError,
                      UndefinedMetricError, ValidationError)
from . import handlers
from .schemas import (EvalRequest, EvalResponse, ExplainRequest,
                      ExplainResponse, GraphResponse, InferRequest,
                      InferResponse, SynthRequest, SynthResponse,
                      TrainOrdinalRequest, TrainRequest, TrainResponse)


def _as_http(fn):
    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except (FormatError, ValidationError, FileNotFoundError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except (DivergenceError, UndefinedMetricError) as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        except EngageError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
    return wrapped


def create_app() -> FastAPI:
    app = FastAPI(title="engagekit", version=__version__)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/graph", response_model=GraphResponse)
    @_as_http
    def graph() -> GraphResponse:
        return handlers.graph_export()

    @app.post("/synth", response_model=SynthResponse)
    @_as_http
    def synth(req: SynthRequest) -> SynthResponse:
        return handlers.synth(req)

    @app.post("/train", response_model=TrainResponse)
    @_as_http
    def train(req: TrainRequest) -> TrainResponse:
        return handlers.train(req)

    @app.post("/train-ordinal", response_model=TrainResponse)
    @_as_http
    def train_ordinal(req: TrainOrdinalRequest) -> TrainResponse:
        return handlers.train_ordinal(req)

    @app.post("/eval", response_model=EvalResponse)
    @_as_http
    def evaluate(req: EvalRequest) -> EvalResponse:
        return handlers.evaluate(req)

    @app.post("/infer", response_model=InferResponse)
    @_as_http
    def infer(req: InferRequest) -> InferResponse:
        return handlers.infer(req)

    @app.post("/explain", response_model=ExplainResponse)
    @_as_http
    def explain(req: ExplainRequest) -> ExplainResponse:
        return handlers.explain(req)

    return app
