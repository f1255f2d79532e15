"""HTTP front end.

Thin by design: parse the request, find the session, call the workbench,
JSON out. Every route except registration and login requires the session
cookie. Domain errors surface through ApiError's status code.
"""

from __future__ import annotations

import base64
import binascii
from pathlib import Path

from fastapi import Body, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from .auth import Group
from .config import ServiceConfig, load_config
from .errors import ApiError, BadRequest, NotAuthenticated
from .workbench import Workbench, tuples_from_wire

SESSION_COOKIE = "elab_session"


def _int_param(raw: str, name: str, default: int) -> int:
    if raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise BadRequest(f"{name} must be an integer", field=name)


def create_app(bench: Workbench) -> FastAPI:
    app = FastAPI(docs_url=None, redoc_url=None, openapi_url=None)

    def current_group(request: Request) -> Group:
        token = request.cookies.get(SESSION_COOKIE)
        group = bench.sessions.resolve(token) if token else None
        if group is None:
            raise NotAuthenticated("sign in first")
        return group

    @app.exception_handler(ApiError)
    def api_error(request: Request, exc: ApiError):
        return JSONResponse(exc.payload(), status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": "malformed request body"}, status_code=400)

    # -- accounts and sessions ----------------------------------------------

    @app.post("/api/groups", status_code=201)
    def register_group(body: dict = Body(...)):
        group = bench.groups.register(
            name=body.get("name", ""),
            school=body.get("school", ""),
            city=body.get("city", ""),
            state=body.get("state", ""),
            role=body.get("role", "student"),
            password=body.get("password", ""),
            teacher_id=body.get("teacher_id"),
        )
        return {"group": group.wire()}

    @app.post("/api/session")
    def login(response: Response, body: dict = Body(...)):
        group = bench.groups.authenticate(
            body.get("name", ""), body.get("school", ""), body.get("password", "")
        )
        if group is None:
            raise NotAuthenticated("bad credentials")
        token = bench.sessions.open(group.group_id)
        response.set_cookie(SESSION_COOKIE, token, httponly=True, samesite="lax")
        return {"group": group.wire()}

    @app.delete("/api/session")
    def logout(request: Request, response: Response):
        current_group(request)
        bench.sessions.close(request.cookies[SESSION_COOKIE])
        response.delete_cookie(SESSION_COOKIE)
        return {"ended": True}

    # -- data ---------------------------------------------------------------

    @app.post("/api/data", status_code=201)
    def upload(request: Request, body: dict = Body(...)):
        group = current_group(request)
        content = body.get("content")
        if not isinstance(content, str):
            raise BadRequest("content must be base64 text", field="content")
        try:
            raw = base64.b64decode(content, validate=True)
        except (binascii.Error, ValueError):
            raise BadRequest("content is not valid base64", field="content")
        declared = tuples_from_wire(body.get("metadata", []))
        return bench.upload_data(group, raw, declared)

    @app.get("/api/data")
    def search(request: Request, q: str = "", page: str = ""):
        group = current_group(request)
        return bench.search_datasets(group, q, _int_param(page, "page", 1))

    # -- analyses -----------------------------------------------------------

    @app.post("/api/analyses", status_code=202)
    def submit_analysis(request: Request, body: dict = Body(...)):
        group = current_group(request)
        return bench.submit_analysis(
            group,
            body.get("study", ""),
            body.get("inputs", []),
            body.get("params", {}),
        )

    @app.get("/api/analyses/{analysis_id}")
    def poll_analysis(request: Request, analysis_id: str):
        return bench.get_analysis(current_group(request), analysis_id)

    @app.get("/api/studies")
    def study_schemas(request: Request):
        current_group(request)
        return bench.study_schemas()

    # -- plots and provenance -----------------------------------------------

    @app.get("/api/plots/{lfn}")
    def get_plot(request: Request, lfn: str):
        data = bench.get_plot_bytes(current_group(request), lfn)
        media = "image/svg+xml" if lfn.endswith(".svg") else "application/octet-stream"
        return Response(content=data, media_type=media)

    @app.get("/api/dag/{lfn}")
    def get_dag(request: Request, lfn: str):
        text = bench.get_dag_text(current_group(request), lfn)
        return PlainTextResponse(text, media_type="text/vnd.graphviz")

    @app.post("/api/plots/{lfn}/metadata")
    def save_plot(request: Request, lfn: str, body: dict = Body(...)):
        group = current_group(request)
        tuples = tuples_from_wire(body.get("metadata", []))
        return bench.save_plot(group, lfn, tuples)

    # -- posters ------------------------------------------------------------

    @app.post("/api/posters", status_code=201)
    def create_poster(request: Request, body: dict = Body(...)):
        return bench.create_poster(current_group(request), body)

    @app.get("/api/posters/{poster_id}")
    def get_poster(request: Request, poster_id: str):
        return bench.get_poster(current_group(request), poster_id)

    # -- comments -----------------------------------------------------------

    @app.post("/api/comments", status_code=201)
    def add_comment(request: Request, body: dict = Body(...)):
        group = current_group(request)
        target = body.get("target")
        if not isinstance(target, str) or not target:
            raise BadRequest("target object id required", field="target")
        return bench.add_comment(group, target, body.get("body", ""))

    @app.get("/api/comments")
    def list_comments(request: Request, target: str = ""):
        group = current_group(request)
        if not target:
            raise BadRequest("target query parameter required", field="target")
        return bench.list_comments(group, target)

    # -- glossary and reference content --------------------------------------

    @app.put("/api/content/{kind}/{name}")
    def put_content(request: Request, kind: str, name: str, body: dict = Body(...)):
        group = current_group(request)
        return bench.put_content(
            group, kind, name, body.get("body", ""), body.get("description", "")
        )

    @app.get("/api/content/{kind}/{name}")
    def get_content(request: Request, kind: str, name: str):
        return bench.get_content(current_group(request), kind, name)

    @app.get("/api/content/{kind}")
    def list_content(request: Request, kind: str):
        return bench.list_content(current_group(request), kind)

    # -- logbook ------------------------------------------------------------

    @app.post("/api/logbook", status_code=201)
    def write_logbook(request: Request, body: dict = Body(...)):
        group = current_group(request)
        return bench.write_logbook(group, body.get("milestone", ""), body.get("body", ""))

    @app.get("/api/logbook")
    def read_logbook(request: Request, group: str = "", milestone: str = ""):
        requester = current_group(request)
        if bool(group) == bool(milestone):
            raise BadRequest("pass exactly one of group= or milestone=")
        if group:
            return bench.read_logbook_group(requester, group)
        return bench.logbook_overview(requester, milestone)

    @app.post("/api/logbook/{entry_id}/comment")
    def grade_entry(request: Request, entry_id: str, body: dict = Body(...)):
        requester = current_group(request)
        return bench.teacher_comment(requester, entry_id, body.get("body", ""))

    @app.get("/api/milestones")
    def milestones(request: Request):
        current_group(request)
        return {"milestones": bench.milestones_wire()}

    static_root = Path(bench.config.static_root) if bench.config.static_root else None
    if static_root is not None and static_root.is_dir():
        from fastapi.staticfiles import StaticFiles

        # Mounted last so /api/* keeps priority; html=True makes / serve index.html.
        app.mount("/", StaticFiles(directory=static_root, html=True), name="ui")

    return app


def serve(config_path: str | None = None) -> None:
    """Run the portal until interrupted."""
    import uvicorn

    config = load_config(config_path) if config_path else ServiceConfig()
    bench = Workbench(Path(config.storage_root), config)
    try:
        uvicorn.run(create_app(bench), host="127.0.0.1", port=config.port, log_level="warning")
    finally:
        bench.close()
