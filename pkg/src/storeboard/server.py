"""HTTP query API over an immutable dataset snapshot.

All state (schema, catalog, dashboard specs) is loaded once at startup and
never mutated, so request handling is freely concurrent. Error bodies are
uniform: {"code": bad-request | not-found | query-error | internal,
"message": ..., "detail": ...}.
"""

from __future__ import annotations

import logging
import os
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .analytics import build_findings_report
from .dashboards import (
    BUNDLED_VERSIONS,
    SpecFormatError,
    bundled_spec,
    lint,
    load_spec,
    spec_to_json,
    validate,
)
from .errors import (
    AmbiguousColumn,
    EmptyAggregation,
    QueryError,
    StoreboardError,
    UnknownColumn,
    UnknownMeasure,
)
from .measures import register_builtin_catalog
from .queries import query_from_json, result_to_json, run
from .snapshot import load_snapshot

log = logging.getLogger("storeboard.server")

LOCAL_DEV_ORIGIN_REGEX = r"^https?://(localhost|127\.0\.0\.1)(:\d+)?$"


def _error(status: int, code: str, message: str, detail=None) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"code": code, "message": message, "detail": detail}
    )


def create_app(schema, catalog=None, specs=None, cors_origins=None, ui_dir=None) -> FastAPI:
    """Build the API app around an already-loaded schema.

    specs: mapping version id -> DashboardSpec; defaults to the bundled four.
    """
    catalog = catalog or register_builtin_catalog()
    if specs is None:
        specs = {v: bundled_spec(v) for v in BUNDLED_VERSIONS}

    app = FastAPI(title="storeboard", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or [],
        allow_origin_regex=None if cors_origins else LOCAL_DEV_ORIGIN_REGEX,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    findings_cache: dict = {}
    findings_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, err: RequestValidationError):
        return _error(400, "bad-request", "request body is not valid", detail=err.errors())

    @app.exception_handler(StoreboardError)
    async def on_storeboard_error(request: Request, err: StoreboardError):
        return _error(500, "internal", str(err))

    @app.get("/api/health")
    def health():
        return {
            "service": "storeboard",
            "version": __version__,
            "rows": schema.row_count,
            "dashboards": sorted(specs),
        }

    @app.get("/api/schema")
    def schema_meta():
        def table_doc(table, role):
            return {
                "name": table.name,
                "role": role,
                "row_count": table.row_count,
                "key_column": table.key_column,
                "columns": [{"name": n, "kind": c.kind} for n, c in table.columns.items()],
            }

        return {
            "fact_rows": schema.row_count,
            "orders": schema.meta.get("distinct_orders"),
            "customers": schema.meta.get("distinct_customers"),
            "products": schema.meta.get("distinct_products"),
            "tables": [table_doc(schema.fact, "fact")]
            + [table_doc(dim, "dimension") for dim in schema.dimensions.values()],
            "relationships": [
                {
                    "fact_column": r.fact_column,
                    "dimension": r.dimension,
                    "dimension_key": r.dimension_key,
                }
                for r in schema.relationships
            ],
            "measures": [
                {"name": name, "source": source} for name, source in catalog.items()
            ],
        }

    @app.post("/api/query")
    async def query(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "bad-request", "body must be a JSON object")
        if not isinstance(body, dict):
            return _error(400, "bad-request", "body must be a JSON object")
        try:
            q = query_from_json(body)
            result = run(schema, catalog, q)
        except (UnknownMeasure, UnknownColumn, AmbiguousColumn, QueryError, EmptyAggregation) as err:
            return _error(400, "query-error", str(err))
        except (KeyError, TypeError, ValueError) as err:
            return _error(400, "bad-request", f"malformed query: {err}")
        return result_to_json(result)

    @app.get("/api/dashboards")
    def dashboards():
        return sorted(specs)

    @app.get("/api/dashboards/{version}")
    def dashboard(version: str):
        spec = specs.get(version)
        if spec is None:
            return _error(404, "not-found", f"no dashboard {version!r}")
        return spec_to_json(spec)

    @app.post("/api/lint")
    async def lint_spec(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "bad-request", "body must be a dashboard spec document")
        try:
            from .dashboards import spec_from_json

            spec = spec_from_json(body)
        except SpecFormatError as err:
            return _error(400, "bad-request", str(err))
        return lint(spec).to_json()

    @app.get("/api/findings")
    def findings():
        with findings_lock:
            if "report" not in findings_cache:
                findings_cache["report"] = build_findings_report(schema, catalog).to_json()
        return findings_cache["report"]

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
        log.info("serving UI from %s", ui_dir)

    return app


def serve(snapshot_path, specs_dir=None, port=8475, bind="127.0.0.1", cors_origins=None, ui_dir=None):
    """Load a snapshot, validate the dashboard specs, and run the service."""
    import uvicorn

    level = os.environ.get("STOREBOARD_LOG", "info").lower()
    logging.basicConfig(level=level.upper())

    schema = load_snapshot(snapshot_path)
    catalog = register_builtin_catalog()
    if specs_dir is None:
        specs = {v: bundled_spec(v) for v in BUNDLED_VERSIONS}
    else:
        specs = {}
        for path in sorted(Path(specs_dir).glob("*.json")):
            spec = load_spec(path)
            specs[spec.version_label] = spec
        if not specs:
            raise SpecFormatError(f"{specs_dir}: no dashboard specs found")
    for version, spec in specs.items():
        violations = validate(spec, schema, catalog)
        if violations:
            raise SpecFormatError(f"{version}: " + "; ".join(violations))

    app = create_app(schema, catalog, specs, cors_origins, ui_dir)
    log.info("serving on %s:%d (%d fact rows)", bind, port, schema.row_count)
    uvicorn.run(app, host=bind, port=port, log_level=level)
