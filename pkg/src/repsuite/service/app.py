"""FastAPI application wrapping the evaluation library.

The service owns all computation; the command line is a thin client
that posts these request bodies and renders the responses. File paths
in requests are resolved on the machine the service runs on — with the
default in-process transport that is the caller's own filesystem.

Error mapping: domain failures (bad catalogs, degenerate data) become
HTTP 400 with ``kind="domain"``; filesystem problems 400 with
``kind="io"``; upstream sampling failures 400 with ``kind="transport"``.
Clients turn those kinds into exit codes.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import RepsuiteError, SimulationError
from ..ingestion import parse_human_responses
from ..distributions import ResponsePanel
from ..model import Catalog, Level, load_catalog, validate_catalog
from ..report import (
    EvalReport,
    compute_bounds,
    evaluate_run,
    report_json_schema,
)
from ..sampler import ModelTask, SamplerConfig, run_simulation
from ..synth import SynthConfig, generate_population, write_population_files, write_simulation_log
from .schemas import (
    BoundsRequest,
    BoundsResponse,
    ErrorDetail,
    EvaluateRequest,
    SimulateRequest,
    SimulateResponse,
    SynthRequest,
    SynthResponse,
    ValidateRequest,
    ValidateResponse,
)


def _error_response(kind: str, exc: Exception) -> JSONResponse:
    detail = ErrorDetail(kind=kind, error=type(exc).__name__, message=str(exc))
    return JSONResponse(status_code=400, content={"detail": detail.model_dump()})


def _load_valid_catalog(path: str) -> Catalog:
    catalog = load_catalog(path)
    violations = validate_catalog(catalog)
    if violations:
        raise RepsuiteError(f"catalog {path} is invalid: " + "; ".join(violations))
    return catalog


def create_app() -> FastAPI:
    app = FastAPI(title="repsuite", version=__version__)

    @app.exception_handler(RepsuiteError)
    async def _domain_handler(request: Request, exc: RepsuiteError):
        kind = "transport" if isinstance(exc, SimulationError) else "domain"
        return _error_response(kind, exc)

    @app.exception_handler(ValueError)
    async def _value_handler(request: Request, exc: ValueError):
        return _error_response("domain", exc)

    @app.exception_handler(OSError)
    async def _io_handler(request: Request, exc: OSError):
        return _error_response("io", exc)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/schema/report")
    def schema_report() -> dict:
        return report_json_schema()

    @app.post("/validate")
    def validate(req: ValidateRequest) -> ValidateResponse:
        catalog = load_catalog(req.catalog_path)
        violations = validate_catalog(catalog)
        return ValidateResponse(
            ok=not violations,
            questions=len(catalog.questions),
            subgroups=len(catalog.subgroups),
            violations=violations,
        )

    @app.post("/synth")
    def synth(req: SynthRequest) -> SynthResponse:
        config = SynthConfig.generate(
            seed=req.seed,
            n_subgroups=req.n_subgroups,
            n_respondents=req.n_respondents,
            latent_dim=req.latent_dim,
            scale_size=req.scale_size,
            noise_scale=req.noise_scale,
        )
        population = generate_population(config)
        out_dir = Path(req.out_dir)
        paths = write_population_files(population, out_dir)
        logs_path = out_dir / "logs.ndjson"
        n_records = write_simulation_log(
            population,
            logs_path,
            methods=tuple(req.methods),
            samples_per_question=req.samples_per_question,
            seed=req.seed,
        )
        return SynthResponse(
            catalog_path=str(paths["catalog"]),
            human_path=str(paths["human"]),
            logs_path=str(logs_path),
            questions=len(population.catalog.questions),
            subgroups=len(population.catalog.subgroups),
            respondents=config.n_respondents,
            log_records=n_records,
        )

    @app.post("/simulate")
    def simulate(req: SimulateRequest) -> SimulateResponse:
        catalog = _load_valid_catalog(req.catalog_path)
        config = SamplerConfig(
            endpoint_url=req.endpoint_url,
            model_name=req.model_name,
            temperature=req.temperature,
            samples_per_question=req.samples_per_question,
            flip_fraction=req.flip_fraction,
            max_in_flight=req.max_in_flight,
            timeout=req.timeout,
            auth_env=req.auth_env,
            seed=req.seed,
        )
        tasks = [ModelTask(model_id=t.model_id, persona=t.persona) for t in req.tasks]
        summary = run_simulation(
            config, catalog, tasks, req.out_path, resume=req.resume
        )
        return SimulateResponse(
            out_path=req.out_path,
            pairs_total=summary.pairs_total,
            pairs_skipped=summary.pairs_skipped,
            records_written=summary.records_written,
            ok_records=summary.ok_records,
            transport_failures=summary.transport_failures,
            flipped_records=summary.flipped_records,
        )

    @app.post("/evaluate")
    def evaluate(req: EvaluateRequest) -> EvalReport:
        return evaluate_run(
            req.catalog_path,
            req.human_path,
            req.logs_path,
            level=Level(req.level),
            bounds_iterations=req.bounds_iterations,
            seed=req.seed,
            workers=req.workers,
        )

    @app.post("/bounds")
    def bounds(req: BoundsRequest) -> BoundsResponse:
        catalog = _load_valid_catalog(req.catalog_path)
        records = parse_human_responses(req.human_path, catalog)
        panel = ResponsePanel.from_records(records, catalog)
        section = compute_bounds(
            panel,
            catalog,
            Level(req.level),
            iterations=req.iterations,
            seed=req.seed,
            workers=req.workers,
        )
        return BoundsResponse(
            level=req.level,
            iterations=req.iterations,
            seed=req.seed,
            bounds=section,
        )

    return app
