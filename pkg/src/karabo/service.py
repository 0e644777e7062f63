"""HTTP API: conversation lifecycle over file-backed persistence.

Endpoints (all JSON, versioned under /api):

    POST /api/conversations                {language?} -> {id, greeting, warning?}
    POST /api/conversations/{id}/messages  {text} -> {assistant_text, safety_notice?}
    GET  /api/conversations/{id}           full transcript
    GET  /api/health                       {"status": "ok"}
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import AppConfig
from .dialogue import ConversationEngine
from .errors import EmptyInputError, UpstreamError
from .gateway import Gateway
from .store import ConversationNotFound, ConversationStore


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def create_app(
    config: AppConfig | None = None,
    *,
    engine: ConversationEngine | None = None,
    store: ConversationStore | None = None,
) -> FastAPI:
    config = config or AppConfig()
    if engine is None:
        engine = ConversationEngine(
            Gateway(config.build_backend()),
            persona=config.persona,
            params=config.generation,
            greetings=config.greetings,
            default_language=config.default_language,
            crisis_lexicon=config.crisis_lexicon,
            safety_notice=config.safety_notice,
            max_history_messages=config.max_history_messages,
        )
    if store is None:
        store = ConversationStore(config.data_dir)

    app = FastAPI(title="karabo", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.store = store
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    # Writers to one conversation are serialized; different ids run in parallel.
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def lock_for(conversation_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(conversation_id, threading.Lock())

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error(400, "E_BAD_REQUEST", "malformed request body")

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/conversations")
    async def create_conversation(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "E_BAD_REQUEST", "body must be valid JSON")
        if not isinstance(body, dict):
            return _error(400, "E_BAD_REQUEST", "body must be a JSON object")
        language = body.get("language")
        if language is not None and not isinstance(language, str):
            return _error(400, "E_BAD_REQUEST", "language must be a string")
        conversation, greet = engine.create(language)
        store.save(conversation)
        payload = {"id": conversation.id, "greeting": greet.text, "language": greet.language}
        if greet.fallback:
            payload["warning"] = (
                f"unknown language {greet.requested!r}; using {greet.language}"
            )
        return payload

    @app.post("/api/conversations/{conversation_id}/messages")
    async def post_message(conversation_id: str, request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "E_BAD_REQUEST", "body must be valid JSON")
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str) or not text.strip():
            return _error(400, "E_EMPTY_INPUT", "text must be a non-empty string")
        with lock_for(conversation_id):
            try:
                conversation = store.load(conversation_id)
            except ConversationNotFound:
                return _error(404, "E_NOT_FOUND", f"no conversation {conversation_id!r}")
            try:
                reply = engine.respond(conversation, text)
            except EmptyInputError as exc:
                return _error(400, exc.code, str(exc))
            except UpstreamError as exc:
                store.save(conversation)  # keep the user turn and error marker
                return _error(502, exc.code, str(exc))
            store.save(conversation)
        payload = {"assistant_text": reply.message.text}
        if reply.safety_notice:
            payload["safety_notice"] = reply.safety_notice
        return payload

    @app.get("/api/conversations/{conversation_id}")
    def get_conversation(conversation_id: str):
        try:
            conversation = store.load(conversation_id)
        except ConversationNotFound:
            return _error(404, "E_NOT_FOUND", f"no conversation {conversation_id!r}")
        return conversation.to_json_obj()

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the app; port 0 binds an ephemeral port and prints it."""
    import socket

    import uvicorn

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    bound_port = sock.getsockname()[1]
    print(f"karabo service listening on http://{host}:{bound_port}", flush=True)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])
