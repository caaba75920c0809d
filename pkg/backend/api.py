import csv
import io
import json
import logging
import uuid

from fastapi import FastAPI, HTTPException, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from backend import config
from backend.adaptation.adapt import Adapter, AdaptationMetrics, AdaptedCircuit, prepare, run_adapter
from backend.adaptation.bench import (
    ADAPTATION_ERRORS,
    CSV_COLUMNS,
    ExperimentConfig,
    run_experiment,
)
from backend.adaptation.circuit_ir import (
    PRESET_DIR,
    Circuit,
    CostModel,
    list_presets,
    load_cost_model,
    parse_circuit,
    serialize_circuit,
)
from backend.adaptation.noise_sim import (
    hellinger_fidelity,
    noise_from_cost,
    simulate_distribution,
    statevector_distribution,
)
from backend.adaptation.smt_model import InstanceTooLargeError, Objective, emit_smtlib
from backend.adaptation.subrules import default_rules
from backend.db.connection import AsyncSessionLocal
from backend.db.init_db import init_db
from backend.db.repository import ExperimentRepository

logger = logging.getLogger(__name__)

app = FastAPI(title="Circuit Adaptation API")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:5173"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.on_event("startup")
async def on_startup():
    await init_db()


@app.exception_handler(InstanceTooLargeError)
async def too_large_handler(_: Request, exc: InstanceTooLargeError):
    return JSONResponse(status_code=413, content={"detail": str(exc)})


async def domain_error_handler(_: Request, exc: Exception):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


for _error in ADAPTATION_ERRORS:
    if _error is not InstanceTooLargeError:
        app.add_exception_handler(_error, domain_error_handler)


class CircuitRequest(BaseModel):
    """
    Schema shared by the circuit endpoints.
    """

    circuit: str
    cost_model: str = Field(default_factory=lambda: config.ADAPT_COST_MODEL)
    objective: Objective = "fidelity"
    adapter: Adapter = "sat"
    diabatic: bool = Field(default_factory=lambda: config.ADAPT_ENABLE_DIABATIC)


class ChosenMatch(BaseModel):
    id: int
    block_id: int
    rule_id: str


class AdaptResponse(BaseModel):
    """
    Adapted circuit text with the substitutions applied and its metrics.
    """

    circuit: str
    adapter: str
    objective: Objective
    objective_value: float
    chosen: list[ChosenMatch]
    metrics: AdaptationMetrics


class SimulateResponse(BaseModel):
    distribution: dict[str, float]
    ideal: dict[str, float]
    hellinger: float


class ExperimentResponse(BaseModel):
    run_id: str
    status: str
    rows: int


def _load(request: CircuitRequest) -> tuple[Circuit, CostModel]:
    return parse_circuit(request.circuit), load_cost_model(request.cost_model)


def _adapt(request: CircuitRequest) -> tuple[AdaptedCircuit, list[ChosenMatch]]:
    circuit, cm = _load(request)
    problem = prepare(circuit, cm, default_rules(request.diabatic))
    adapted = run_adapter(circuit, cm, request.adapter, request.objective, problem=problem)
    by_id = {m.id: m for m in problem.matches}
    chosen = [
        ChosenMatch(id=s, block_id=by_id[s].block_id, rule_id=by_id[s].rule_id)
        for s in adapted.chosen
        if s in by_id
    ]
    return adapted, chosen


@app.get("/cost-models")
async def get_cost_models():
    """
    Lists the bundled cost model presets with their gate rows.
    """
    return [
        {
            **load_cost_model(name).model_dump(),
            "description": json.loads((PRESET_DIR / f"{name}.json").read_text()).get(
                "description", ""
            ),
        }
        for name in list_presets()
    ]


@app.post("/adapt", response_model=AdaptResponse)
async def adapt_circuit(request: CircuitRequest):
    """
    Adapts a circuit to the target gate set with the requested adapter.
    """
    adapted, chosen = await run_in_threadpool(_adapt, request)
    return AdaptResponse(
        circuit=serialize_circuit(adapted.circuit),
        adapter=adapted.adapter,
        objective=request.objective,
        objective_value=adapted.objective_value or 0.0,
        chosen=chosen,
        metrics=adapted.metrics,
    )


def _emit_smt(request: CircuitRequest) -> str:
    circuit, cm = _load(request)
    problem = prepare(circuit, cm, default_rules(request.diabatic))
    return emit_smtlib(problem.model(request.objective))


@app.post("/emit-smt")
async def emit_smt(request: CircuitRequest):
    """
    Returns the SMT-LIB2 optimization script of a circuit's adaptation model.
    """
    return {"smtlib": await run_in_threadpool(_emit_smt, request)}


def _simulate(request: CircuitRequest) -> SimulateResponse:
    adapted, _ = _adapt(request)
    circuit, cm = _load(request)
    ideal = statevector_distribution(circuit)
    noisy = simulate_distribution(adapted, noise_from_cost(cm))
    return SimulateResponse(
        distribution=noisy, ideal=ideal, hellinger=hellinger_fidelity(noisy, ideal)
    )


@app.post("/simulate", response_model=SimulateResponse)
async def simulate(request: CircuitRequest):
    """
    Simulates the adapted circuit under gate and idle noise.
    """
    return await run_in_threadpool(_simulate, request)


@app.post("/experiments", response_model=ExperimentResponse)
async def start_experiment(cfg: ExperimentConfig):
    """
    Runs a benchmark sweep and persists its rows.
    """
    run_id = f"{cfg.family}-{uuid.uuid4().hex[:8]}"
    async with AsyncSessionLocal() as session:
        repo = ExperimentRepository(session)
        await repo.save_run(run_id, cfg, status="running")
        try:
            rows = await run_in_threadpool(run_experiment, cfg)
        except Exception as e:
            logger.error("Experiment %s failed: %s", run_id, e)
            await repo.save_run(run_id, cfg, status="failed", error=str(e))
            raise
        await repo.add_rows(run_id, rows)
        await repo.save_run(run_id, cfg, status="completed")
    logger.info("Experiment %s stored %d rows", run_id, len(rows))
    return ExperimentResponse(run_id=run_id, status="completed", rows=len(rows))


@app.get("/experiments")
async def get_history():
    """
    Retrieves a list of recent experiment runs.
    """
    async with AsyncSessionLocal() as session:
        repo = ExperimentRepository(session)
        return await repo.list_runs(limit=10)


@app.get("/experiments/{run_id}")
async def get_experiment(run_id: str):
    """
    Retrieves a run with its configuration and rows.
    """
    async with AsyncSessionLocal() as session:
        repo = ExperimentRepository(session)
        run = await repo.get_run(run_id)
        if not run:
            raise HTTPException(status_code=404, detail="Run not found")
        rows = await repo.get_rows(run_id)
    return {**run, "rows": rows}


@app.get("/experiments/{run_id}/export")
async def export_experiment_csv(run_id: str):
    """
    Exports the rows of a run as a CSV file.
    """
    async with AsyncSessionLocal() as session:
        repo = ExperimentRepository(session)
        run = await repo.get_run(run_id)
        if not run:
            raise HTTPException(status_code=404, detail="Run not found")
        rows = await repo.get_rows(run_id)

    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row.model_dump())

    output.seek(0)
    return StreamingResponse(
        iter([output.getvalue()]),
        media_type="text/csv",
        headers={"Content-Disposition": f"attachment; filename=experiment_{run_id}.csv"},
    )
