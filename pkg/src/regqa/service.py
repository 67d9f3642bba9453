"""Read-only HTTP service over a loaded bundle.

POST /query answers a question; GET /sections/{id} returns one
provision; GET /health reports bundle counts. The bundle loads at
startup and no request mutates it.
"""
from __future__ import annotations

import asyncio
import functools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bundle import load_bundle
from .errors import MalformedId, ProviderError, RegqaError, RetrievalStageError
from .llm import ProviderConfig, build_gateway
from .retrieval import RetrievalConfig, RetrievalEngine
from .sections import parse_section_id

logger = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    bundle_dir: str = "bundle"
    host: str = "127.0.0.1"
    port: int = 8000
    provider: str = "mock"
    fixtures_dir: str | None = None
    strict_mock: bool = False
    base_url: str | None = None
    model_name: str = "mock-chat"
    embedding_model: str = "mock-embed"
    cors_origins: list[str] = field(default_factory=list)
    request_timeout: float = 30.0
    api_key: str | None = None
    k: int = 5
    min_sim: float = 0.5
    # answers are computed per request by default; set > 0 to memoize
    answer_cache_size: int = 0

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")
        if self.answer_cache_size < 0:
            raise ValueError("answer_cache_size must be >= 0")


def load_service_config(path: str | Path) -> ServiceConfig:
    """Read ServiceConfig from a JSON or TOML file."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python 3.10
            import tomli as tomllib
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        data = json.loads(path.read_text(encoding="utf-8"))
    return ServiceConfig(**data)


class QueryRequest(BaseModel):
    question: str = ""


def make_engine(config: ServiceConfig, bundle=None, gateway=None) -> RetrievalEngine:
    if bundle is None:
        bundle = load_bundle(config.bundle_dir)
    if gateway is None:
        provider_config = None
        if config.provider == "remote":
            provider_config = ProviderConfig(
                provider_kind="remote-chat-embeddings",
                model_name=config.model_name,
                embedding_model=config.embedding_model,
                embedding_dim=bundle.schema.dim,
                base_url=config.base_url,
            )
        gateway = build_gateway(
            config.provider,
            dim=bundle.schema.dim,
            fixtures_dir=config.fixtures_dir,
            strict=config.strict_mock,
            config=provider_config,
        )
    retrieval_config = RetrievalConfig(k=config.k, min_sim=config.min_sim)
    return RetrievalEngine(bundle, gateway, retrieval_config)


def create_app(config: ServiceConfig | None = None, *, bundle=None,
               gateway=None, engine=None) -> FastAPI:
    """Application factory; tests may inject bundle/gateway/engine."""
    config = config or ServiceConfig()
    app = FastAPI(
        title="regqa",
        version="0.1.0",
        description="Question answering over hierarchically numbered "
                    "regulatory text via dual-graph hybrid retrieval.",
    )
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

    if engine is None and (bundle is not None or config is not None):
        try:
            engine = make_engine(config, bundle=bundle, gateway=gateway)
        except (RegqaError, OSError) as exc:
            # openapi generation and config validation need an app without
            # a loadable bundle; queries will fail with 503
            logger.warning("service starting without an engine: %s", exc)
            engine = None
    app.state.engine = engine
    app.state.config = config
    answer_fn = None
    if engine is not None:
        answer_fn = engine.answer_question
        if config.answer_cache_size > 0:
            # the bundle is immutable, so identical questions may share
            # one deterministic answer
            answer_fn = functools.lru_cache(
                maxsize=config.answer_cache_size)(engine.answer_question)
    app.state.answer_fn = answer_fn

    def _require_engine() -> RetrievalEngine:
        if app.state.engine is None:
            raise HTTPException(503, detail="no bundle loaded")
        return app.state.engine

    def _check_api_key(request: Request) -> None:
        if config.api_key and request.headers.get("X-API-Key") != config.api_key:
            raise HTTPException(401, detail="missing or wrong API key")

    @app.post("/query")
    async def query(request: Request, body: QueryRequest, trace: int = 0):
        _check_api_key(request)
        _require_engine()
        question = body.question.strip()
        if not question:
            raise HTTPException(400, detail="question is empty")
        try:
            answer = await asyncio.wait_for(
                run_in_threadpool(app.state.answer_fn, question),
                timeout=config.request_timeout)
        except asyncio.TimeoutError:
            raise HTTPException(
                504, detail=f"timed out after {config.request_timeout}s")
        except RetrievalStageError as exc:
            if isinstance(exc.cause, ProviderError):
                raise HTTPException(
                    502, detail=f"provider failure at stage {exc.stage}: "
                                f"{exc.cause}")
            raise HTTPException(500, detail=str(exc))
        except ProviderError as exc:
            raise HTTPException(502, detail=str(exc))
        payload = answer.to_dict(include_trace=bool(trace))
        if answer.trace.reason == "empty_decomposition":
            return JSONResponse(
                status_code=422,
                content={"detail": "no entities found in question",
                         "answer": payload})
        return payload

    @app.get("/sections/{section_id}")
    async def section(request: Request, section_id: str):
        _check_api_key(request)
        engine = _require_engine()
        try:
            parsed = parse_section_id(section_id)
        except MalformedId as exc:
            raise HTTPException(400, detail=str(exc))
        node = engine.bundle.corpus_by_id().get(parsed)
        if node is None:
            raise HTTPException(404, detail=f"unknown section {parsed}")
        return {
            "id": node.id.canonical_text,
            "title": node.title,
            "body": node.body,
            "source_url": node.source_url,
            "order_index": node.order_index,
        }

    @app.get("/health")
    async def health():
        engine = app.state.engine
        if engine is None:
            return {"status": "empty", "bundle": None}
        return {
            "status": "ok",
            "bundle": {
                "counts": engine.bundle.counts(),
                "dim": engine.bundle.schema.dim,
                "meta": engine.bundle.meta,
            },
        }

    return app


def export_openapi(path: str | Path) -> None:
    """Write the OpenAPI description of the service to a file."""
    level = logger.level
    logger.setLevel(logging.ERROR)  # no bundle is expected here
    try:
        app = create_app(ServiceConfig(bundle_dir="/nonexistent"))
    finally:
        logger.setLevel(level)
    spec = app.openapi()
    Path(path).write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
