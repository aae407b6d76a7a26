"""HTTP gateway: registry admin, routing, and dispatch to expert backends.

Endpoints (all JSON, under /v1/):

    GET    /v1/health
    GET    /v1/experts
    POST   /v1/experts
    DELETE /v1/experts/{id}
    POST   /v1/route   {question}                      -> route decision, no dispatch
    POST   /v1/chat    {question, image?, session_id?} -> dispatch to selected expert

Handlers are sync functions; FastAPI runs them in its worker thread pool, so
the registry snapshot swap and the ledger lock are the only shared state.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import threading
import time
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from medagi.backbone import ComponentSpec, ResourceLedger
from medagi.config import Settings
from medagi.embedding import EmbeddingProvider, HashingProvider, normalize_text
from medagi.errors import BackendFailure, DuplicateComponent, MedagiError
from medagi.registry import ExpertDescriptor, Registry
from medagi.seeds import seed_registry
from medagi.selection import RouteDecision, SelectionConfig, select

access_log = logging.getLogger("medagi.gateway.access")


class ImageTooLarge(MedagiError):
    http_status = 413


class BadImage(MedagiError):
    http_status = 422


class RouteRequest(BaseModel):
    question: str
    image: Optional[str] = None  # base64
    session_id: Optional[str] = None


@dataclass
class BackendClient:
    """Talks to one expert backend; ``mock`` mode answers locally and deterministically."""

    endpoint: Optional[str]
    timeout_ms: int = 10_000
    mode: str = "mock"
    transport: Optional[httpx.BaseTransport] = None

    def ask(
        self,
        expert_id: str,
        question: str,
        image: Optional[bytes] = None,
        session_id: Optional[str] = None,
        adapter_ref: Optional[str] = None,
    ) -> str:
        if self.mode == "mock":
            n = len(normalize_text(question))
            return f"expert {expert_id} received {n} tokens, image={'present' if image else 'absent'}"
        if not self.endpoint:
            raise BackendFailure(f"expert {expert_id!r} has no backend endpoint")
        payload = {
            "expert_id": expert_id,
            "adapter_ref": adapter_ref,
            "question": question,
            "image": base64.b64encode(image).decode("ascii") if image else None,
            "session_id": session_id,
        }
        try:
            with httpx.Client(timeout=self.timeout_ms / 1000, transport=self.transport) as client:
                resp = client.post(self.endpoint, json=payload)
        except httpx.TimeoutException as exc:
            raise BackendFailure(f"backend {self.endpoint} timed out") from exc
        except httpx.HTTPError as exc:
            raise BackendFailure(f"backend {self.endpoint} unreachable: {exc}") from exc
        if not resp.is_success:
            raise BackendFailure(f"backend {self.endpoint} returned {resp.status_code}")
        try:
            answer = resp.json()["answer"]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendFailure(f"backend {self.endpoint} sent a malformed body") from exc
        if not isinstance(answer, str) or not answer:
            raise BackendFailure(f"backend {self.endpoint} sent an empty answer")
        return answer


class _SerializedProvider:
    """Wraps a provider that is not safe to call from several threads."""

    thread_safe = True

    def __init__(self, inner: EmbeddingProvider):
        self._inner = inner
        self._lock = threading.Lock()
        self.id = inner.id
        self.dimension = inner.dimension

    @property
    def config_hash(self) -> str:
        return self._inner.config_hash

    @property
    def fingerprint(self) -> str:
        return self._inner.fingerprint

    def embed(self, tokens: Sequence[str]):
        with self._lock:
            return self._inner.embed(tokens)


class Gateway:
    def __init__(
        self,
        settings: Settings,
        *,
        provider: EmbeddingProvider | None = None,
        registry: Registry | None = None,
        ledger: ResourceLedger | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.settings = settings
        if provider is None:
            provider = registry.provider if registry is not None else HashingProvider(settings.embed_dim)
        if not getattr(provider, "thread_safe", False):
            provider = _SerializedProvider(provider)
        self.provider = provider
        if registry is None:
            if settings.registry_path:
                registry = Registry.open(provider, settings.registry_path)
            else:
                registry = Registry(provider)
        self.registry = registry
        if settings.seed and len(registry.snapshot) == 0:
            seed_registry(registry)
        self.ledger = ledger or ResourceLedger(settings.budget_bytes, settings.components)
        self.selection = SelectionConfig(settings.threshold, settings.top_k)
        self.transport = transport
        for expert in registry.snapshot.experts:
            self.ensure_adapter(expert.id)

    def ensure_adapter(self, expert_id: str) -> None:
        name = f"{expert_id}_align"
        if not self.ledger.is_declared(name):
            try:
                self.ledger.declare_component(ComponentSpec(name, "adapter", self.settings.adapter_bytes))
            except DuplicateComponent:
                pass

    def backend_for(self, expert: ExpertDescriptor) -> BackendClient:
        return BackendClient(
            expert.backend_endpoint,
            self.settings.backend_timeout_ms,
            self.settings.backend_mode,
            self.transport,
        )

    def health(self) -> dict[str, Any]:
        return {
            "status": "ok",
            "registry_version": self.registry.version,
            "resident_bytes": self.ledger.resident_bytes,
        }

    def register(self, body: Any) -> ExpertDescriptor:
        descriptor = ExpertDescriptor.from_dict(body, strict=False)
        self.registry.register(descriptor)
        self.ensure_adapter(descriptor.id)
        return descriptor

    def route(self, question: str) -> RouteDecision:
        normalize_text(question)  # empty question is a 422 even when the registry is empty
        return select(question, self.registry.snapshot, self.selection, self.provider)

    def decode_image(self, image: Optional[str]) -> Optional[bytes]:
        if image is None:
            return None
        # base64 inflates by 4/3; reject oversized payloads before decoding
        if len(image) > (self.settings.max_image_bytes * 4) // 3 + 4:
            raise ImageTooLarge(f"image exceeds {self.settings.max_image_bytes} bytes")
        try:
            raw = base64.b64decode(image, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise BadImage("image is not valid base64") from exc
        if len(raw) > self.settings.max_image_bytes:
            raise ImageTooLarge(f"image exceeds {self.settings.max_image_bytes} bytes")
        return raw

    def chat(self, req: RouteRequest) -> tuple[Optional[str], str, RouteDecision]:
        normalize_text(req.question)
        image = self.decode_image(req.image)
        snapshot = self.registry.snapshot
        decision = select(req.question, snapshot, self.selection, self.provider)
        if not decision.confident:
            return None, "", decision
        expert = snapshot.get(decision.selected)
        self.ensure_adapter(expert.id)
        with self.ledger.leased(expert.id):
            answer = self.backend_for(expert).ask(
                expert.id, req.question, image, req.session_id, expert.adapter_ref
            )
        return expert.id, answer, decision


def _decision_body(decision: RouteDecision, top_k: int) -> dict[str, Any]:
    return decision.truncated(top_k).to_dict()


def create_app(settings: Settings | None = None, **kwargs: Any) -> FastAPI:
    settings = settings or Settings(registry_path=None)
    gw = Gateway(settings, **kwargs)
    app = FastAPI(title="medagi gateway")
    app.state.gateway = gw

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        start = time.perf_counter()
        request.state.log = {}
        response = await call_next(request)
        record = {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "path": request.url.path,
            **request.state.log,
            "status": response.status_code,
            "ms": round((time.perf_counter() - start) * 1000, 3),
        }
        access_log.info(json.dumps(record, sort_keys=True))
        return response

    @app.exception_handler(MedagiError)
    async def domain_error(request: Request, exc: MedagiError):
        return JSONResponse({"error": type(exc).__name__, "detail": str(exc)}, status_code=exc.http_status)

    def _note(request: Request, decision: RouteDecision) -> None:
        request.state.log.update(
            {"expert_id": decision.selected, "score": decision.score, "margin": decision.margin}
        )

    @app.get("/v1/health")
    def health():
        return gw.health()

    @app.get("/v1/experts")
    def list_experts():
        return {
            "registry_version": gw.registry.version,
            "experts": [e.to_dict() for e in gw.registry.list_experts()],
        }

    @app.post("/v1/experts", status_code=201)
    def add_expert(body: dict):
        descriptor = gw.register(body)
        return {"registry_version": gw.registry.version, "expert": descriptor.to_dict()}

    @app.delete("/v1/experts/{expert_id}")
    def remove_expert(expert_id: str):
        gw.registry.remove(expert_id)
        return {"registry_version": gw.registry.version, "removed": expert_id}

    @app.post("/v1/route")
    def route(req: RouteRequest, request: Request):
        decision = gw.route(req.question)
        _note(request, decision)
        return _decision_body(decision, settings.top_k)

    @app.post("/v1/chat")
    def chat(req: RouteRequest, request: Request):
        start = time.perf_counter()
        expert_id, answer, decision = gw.chat(req)
        _note(request, decision)
        return {
            "expert_id": expert_id,
            "answer": answer,
            "decision": _decision_body(decision, settings.top_k),
            "timing_ms": int((time.perf_counter() - start) * 1000),
        }

    return app


def serve(settings: Settings) -> None:
    import uvicorn

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    uvicorn.run(create_app(settings), host=settings.host, port=settings.port, log_level="warning")

