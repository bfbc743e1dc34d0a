"""HTTP JSON API over the news engine.

Every non-2xx body has the shape {status, code, message}. CORS is
deny-by-default: without a configured allowlist no cross-origin header is
ever emitted. One JSON line is logged per request.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, fields
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .corpus import (
    ConfigError,
    ParseError,
    TranslationError,
    Translator,
    TranslatorConfig,
    articles_from_objects,
    parse_articles,
)
from .engine import ModelUnavailable, NewsEngine
from .events import ClustererConfig
from .textindex import SearchWeights

log = logging.getLogger("finfact.server")

MAX_PAGE_SIZE = 100
MAX_SEARCH_LIMIT = 100

API_KEY_ENV = "FINFACT_TRANSLATE_API_KEY"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"status": self.status, "code": self.code, "message": self.message},
        )


@dataclass(frozen=True)
class ServerConfig:
    store_dir: str
    host: str = "127.0.0.1"
    port: int = 8080
    checkpoint: str | None = None
    w_hashtag: float = 2.0
    w_content: float = 1.0
    tau: float = 0.30
    k_hashtags: int = 5
    time_window_days: float | None = None
    cors_origins: tuple[str, ...] = ()
    translate: str = "none"
    glossary: str | None = None
    translate_endpoint: str | None = None
    translate_cache: str | None = None
    api_key: str | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.port <= 65535):
            raise ConfigError(f"port must be in 1-65535, got {self.port}")
        if self.translate not in ("none", "glossary", "remote"):
            raise ConfigError(f"translate must be none, glossary or remote, got {self.translate!r}")
        if self.translate == "glossary" and not self.glossary:
            raise ConfigError("translate=glossary requires a glossary path")
        if self.translate == "remote" and not self.translate_endpoint:
            raise ConfigError("translate=remote requires translate_endpoint")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServerConfig":
        """Parse a key = value config file; '#' starts a comment line.

        The translation API key may come from the environment instead of the
        file, so secrets never need to live on disk.
        """
        raw: dict[str, str] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
        if "store_dir" not in raw:
            raise ConfigError(f"{path}: store_dir is required")
        kwargs: dict = {"store_dir": raw["store_dir"]}
        for name in ("host", "checkpoint", "translate", "glossary",
                     "translate_endpoint", "translate_cache", "api_key"):
            if name in raw:
                kwargs[name] = raw[name]
        if "port" in raw:
            kwargs["port"] = int(raw["port"])
        if "k_hashtags" in raw:
            kwargs["k_hashtags"] = int(raw["k_hashtags"])
        for name in ("w_hashtag", "w_content", "tau", "time_window_days"):
            if name in raw:
                kwargs[name] = float(raw[name])
        if "cors_origins" in raw:
            kwargs["cors_origins"] = tuple(
                origin.strip() for origin in raw["cors_origins"].split(",") if origin.strip()
            )
        if os.environ.get(API_KEY_ENV):
            kwargs["api_key"] = os.environ[API_KEY_ENV]
        return cls(**kwargs)

    def build_translator(self) -> Translator | None:
        if self.translate == "none":
            return None
        if self.translate == "glossary":
            return Translator(TranslatorConfig(mode="glossary-stub", glossary_path=self.glossary))
        cfg = TranslatorConfig(
            mode="remote",
            endpoint=self.translate_endpoint,
            cache_path=self.translate_cache,
            api_key=self.api_key,
        )
        return Translator(cfg)


def build_engine(config: ServerConfig) -> NewsEngine:
    return NewsEngine(
        store_dir=config.store_dir,
        clusterer=ClustererConfig(
            tau=config.tau,
            k_hashtags=config.k_hashtags,
            time_window_days=config.time_window_days,
        ),
        weights=SearchWeights(config.w_hashtag, config.w_content),
        translator=config.build_translator(),
        checkpoint_path=config.checkpoint,
    )


def create_app(config: ServerConfig, engine: NewsEngine | None = None) -> FastAPI:
    app = FastAPI(title="finfact", docs_url=None, redoc_url=None, openapi_url=None)
    engine = engine if engine is not None else build_engine(config)
    app.state.engine = engine

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["GET", "POST"],
            allow_headers=["Content-Type"],
        )

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        started = time.monotonic()
        response = await call_next(request)
        log.info(json.dumps({
            "method": request.method,
            "path": request.url.path,
            "status": response.status_code,
            "duration_ms": round((time.monotonic() - started) * 1000.0, 3),
        }, sort_keys=True))
        return response

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return ApiError(400, "bad_request", str(exc)).response()

    @app.exception_handler(StarletteHTTPException)
    async def handle_http(request: Request, exc: StarletteHTTPException):
        return ApiError(exc.status_code, "http_error", str(exc.detail)).response()

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return ApiError(500, "internal_error", f"{type(exc).__name__}: {exc}").response()

    @app.post("/api/articles")
    async def post_articles(request: Request):
        body = await request.body()
        stripped = body.lstrip()
        try:
            if stripped.startswith(b"["):
                payload = json.loads(body.decode("utf-8"))
                if not isinstance(payload, list):
                    raise ApiError(400, "bad_payload", "expected a JSON array or JSON lines")
                articles = articles_from_objects(payload)
            else:
                articles = parse_articles(body)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ApiError(400, "bad_payload", f"invalid JSON: {exc}") from exc
        except ParseError as exc:
            raise ApiError(400, "bad_payload", str(exc)) from exc
        try:
            return engine.ingest(articles)
        except TranslationError as exc:
            raise ApiError(503, "translator_unavailable", str(exc)) from exc

    @app.get("/api/events")
    async def get_events(lang: str = "en", page: int = 1, page_size: int = 20):
        if page_size > MAX_PAGE_SIZE:
            raise ApiError(400, "bad_paging", f"page_size must be <= {MAX_PAGE_SIZE}")
        try:
            rows = engine.board(lang=lang, page=page, page_size=page_size)
        except ValueError as exc:
            raise ApiError(400, "bad_paging", str(exc)) from exc
        return {"events": rows, "page": page, "page_size": page_size}

    @app.get("/api/search")
    async def get_search(q: str = "", lang: str = "en", limit: int = 20):
        if not q.strip():
            raise ApiError(400, "empty_query", "q must be a non-empty query string")
        if not (1 <= limit <= MAX_SEARCH_LIMIT):
            raise ApiError(400, "bad_request", f"limit must be in 1-{MAX_SEARCH_LIMIT}")
        try:
            return engine.search(q, lang=lang, limit=limit)
        except ValueError as exc:
            raise ApiError(400, "empty_query", str(exc)) from exc

    @app.post("/api/factcheck")
    async def post_factcheck(request: Request):
        try:
            payload = json.loads((await request.body()).decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ApiError(400, "bad_request", f"invalid JSON: {exc}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise ApiError(400, "bad_request", "body must be a JSON object with a text field")
        text = payload["text"]
        if not text.strip():
            raise ApiError(400, "empty_text", "text must be non-empty")
        try:
            return engine.credibility(text)
        except ModelUnavailable as exc:
            raise ApiError(503, "model_unavailable", str(exc)) from exc
        except ValueError as exc:
            raise ApiError(400, "empty_text", str(exc)) from exc

    @app.get("/api/health")
    async def get_health():
        counts = engine.counts()
        return {"status": "ok", **counts}

    return app


def run(config: ServerConfig) -> None:
    import uvicorn

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
