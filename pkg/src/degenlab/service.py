"""HTTP service exposing the experiment registry.

The service is the single entry point for running experiments: the
command-line client talks to it (in-process by default, over the wire
when pointed at a running server).  Endpoints return the canonical
report plus the plot-ready tables; file writing stays on the client
side so the service itself is stateless.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from . import experiments as xp


class RunRequest(BaseModel):
    experiment: str
    params: dict = Field(default_factory=dict)


class SweepRequest(BaseModel):
    experiment: str
    base: dict = Field(default_factory=dict)
    ranges: dict
    cap: int = xp.SWEEP_CAP


class SuiteRequest(BaseModel):
    seed: int = 0


class TableModel(BaseModel):
    header: list
    rows: list


class RunResponse(BaseModel):
    report: dict
    tables: dict[str, TableModel]
    wall_clock: float


class SweepResponse(BaseModel):
    reports: list[dict]
    aggregate: TableModel
    wall_clock: float


def _tables_payload(tables: dict) -> dict:
    return {name: TableModel(header=list(header),
                             rows=[list(r) for r in rows])
            for name, (header, rows) in tables.items()}


def _run_result(result: xp.ExperimentResult) -> RunResponse:
    return RunResponse(report=result.report,
                       tables=_tables_payload(result.tables),
                       wall_clock=result.wall_clock)


def create_app() -> FastAPI:
    app = FastAPI(title="degenlab", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/experiments")
    def experiments() -> dict:
        return {name: {"statement": exp.statement,
                       "defaults": xp._sanitize(exp.defaults)}
                for name, exp in xp.REGISTRY.items()}

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        try:
            result = xp.run_experiment(req.experiment, req.params)
        except xp.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except Exception as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return _run_result(result)

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest) -> SweepResponse:
        try:
            results, (header, rows) = xp.sweep(req.experiment, req.base,
                                               req.ranges, cap=req.cap)
        except xp.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except Exception as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        wall = sum(r.wall_clock for r in results)
        return SweepResponse(reports=[r.report for r in results],
                             aggregate=TableModel(header=list(header),
                                                  rows=[list(r)
                                                        for r in rows]),
                             wall_clock=wall)

    @app.post("/suite", response_model=RunResponse)
    def suite(req: SuiteRequest) -> RunResponse:
        try:
            result = xp.run_suite(seed=req.seed)
        except xp.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except Exception as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return _run_result(result)

    return app


_app: Optional[FastAPI] = None


def get_app() -> FastAPI:
    """Module-level app instance (also the uvicorn target)."""
    global _app
    if _app is None:
        _app = create_app()
    return _app
