"""Read-only HTTP JSON API over a loaded project.

The handlers wrap the same `Project` methods the CLI uses and return the
same canonical bytes, so CLI files and HTTP bodies are byte-identical for
identical logical requests.  All state is immutable after load; region
recomputation requests are pure functions of (project, overrides).
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict

from .errors import ConfigError, NumericsError, PreconditionError
from .project import Project, RegionOverrides

JSON = "application/json"


class RegionRequest(BaseModel):
    """POST /api/region body: values overriding the project constraints."""

    model_config = ConfigDict(extra="forbid")

    pm_min: float | None = None
    pm_max: float | None = None
    gm_min: float | None = None
    use_margins: bool | None = None
    use_ms: bool | None = None
    nx: int | None = None
    ny: int | None = None
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None

    def to_overrides(self) -> RegionOverrides:
        return RegionOverrides(
            pm_min=self.pm_min,
            pm_max=self.pm_max,
            gm_min=self.gm_min,
            use_margins=self.use_margins,
            use_ms=self.use_ms,
            nx=self.nx,
            ny=self.ny,
            x_range=self.x_range,
            y_range=self.y_range,
        )


def create_app(project: Project, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="pidspace", version="1")

    @app.exception_handler(RequestValidationError)
    async def malformed_query(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request", "detail": exc.errors()})

    @app.exception_handler(ConfigError)
    async def bad_values(request: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(PreconditionError)
    async def precondition(request: Request, exc: PreconditionError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(NumericsError)
    async def numerics(request: Request, exc: NumericsError):
        return JSONResponse(status_code=500, content={"error": "computation failed", "detail": str(exc)})

    @app.get("/api/project")
    def get_project() -> Response:
        return Response(content=project.project_bytes(), media_type=JSON)

    @app.get("/api/region")
    def get_region() -> Response:
        return Response(content=project.region_bytes(), media_type=JSON)

    @app.post("/api/region")
    def post_region(request: RegionRequest) -> Response:
        region = project.region_map_with_overrides(request.to_overrides())
        return Response(content=project.region_bytes(region), media_type=JSON)

    @app.get("/api/analyze")
    def get_analyze(kp: float, ki: float = 0.0, kd: float = 0.0, curves: bool = True) -> Response:
        return Response(content=project.analyze_bytes(kp, ki, kd, with_curves=curves), media_type=JSON)

    @app.get("/api/simulate")
    def get_simulate(
        kp: float,
        ki: float = 0.0,
        kd: float = 0.0,
        ref: Literal["step", "ramp"] = "step",
        n: int = 1000,
        force: bool = False,
    ) -> Response:
        return Response(content=project.simulate_bytes(kp, ki, kd, ref, n, force=force), media_type=JSON)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="explorer")
    return app


def default_static_dir() -> Path | None:
    """The built explorer bundle, when present in the repository."""
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None
