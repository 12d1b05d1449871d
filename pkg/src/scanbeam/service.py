"""HTTP face of the toolkit: every subcommand as a POST endpoint.

The wire contract mirrors the CLI exactly. A request carries the same JSON
config document the CLI reads from disk plus the subcommand's parameters;
the response carries the artifacts as named text blobs, the summary, and
the code the CLI would have exited with. Domain failures are reported in
the response body with HTTP 200 so a thin client can write artifacts and
propagate the code without interpreting anything.
"""

from fastapi import FastAPI
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .errors import ScanBeamError
from .ops import (
    classify_error,
    op_certify,
    op_check3d,
    op_checkhd,
    op_graph,
    op_reconstruct,
    op_regions,
    op_selftest,
    op_simulate,
)
from .runconfig import RunConfig


class ConfiguredRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict
    threads: int = Field(default=1, ge=1, le=256)

    def run_config(self):
        return RunConfig.model_validate(self.config)


class PointRequest(ConfiguredRequest):
    point: str


class SimulateRequest(ConfiguredRequest):
    count: int = Field(default=200, ge=1)


class CertifyRequest(ConfiguredRequest):
    point: str
    pairs: int = Field(default=100, ge=1)


class AnchorRequest(ConfiguredRequest):
    anchor: str


class CheckHdRequest(ConfiguredRequest):
    dim: int | None = None
    point: str | None = None


class OpResponse(BaseModel):
    code: int
    summary: dict
    artifacts: dict
    error: str | None = None


def _respond(work):
    try:
        result = work()
    except ScanBeamError as exc:
        return OpResponse(code=classify_error(exc), summary={}, artifacts={}, error=str(exc))
    return OpResponse(code=result.code, summary=result.summary, artifacts=result.artifacts)


def create_app():
    app = FastAPI(title="scanbeam", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/regions", response_model=OpResponse)
    def regions(req: ConfiguredRequest):
        return _respond(lambda: op_regions(req.run_config(), threads=req.threads))

    @app.post("/graph", response_model=OpResponse)
    def graph(req: PointRequest):
        return _respond(lambda: op_graph(req.run_config(), req.point))

    @app.post("/simulate", response_model=OpResponse)
    def simulate(req: SimulateRequest):
        return _respond(lambda: op_simulate(req.run_config(), count=req.count))

    @app.post("/reconstruct", response_model=OpResponse)
    def reconstruct(req: ConfiguredRequest):
        return _respond(lambda: op_reconstruct(req.run_config(), threads=req.threads))

    @app.post("/certify", response_model=OpResponse)
    def certify(req: CertifyRequest):
        return _respond(lambda: op_certify(req.run_config(), req.point, pairs=req.pairs))

    @app.post("/check3d", response_model=OpResponse)
    def check3d(req: AnchorRequest):
        return _respond(lambda: op_check3d(req.run_config(), req.anchor))

    @app.post("/checkhd", response_model=OpResponse)
    def checkhd(req: CheckHdRequest):
        return _respond(lambda: op_checkhd(req.run_config(), dim=req.dim, point=req.point))

    @app.post("/selftest", response_model=OpResponse)
    def selftest():
        return _respond(op_selftest)

    return app


app = create_app()
