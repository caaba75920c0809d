"""
Repository tests against an in-memory SQLite database.
"""

import pytest
import pytest_asyncio
from sqlalchemy.pool import StaticPool

from backend.adaptation.bench import ExperimentConfig, ExperimentRow
from backend.db.connection import Base, make_engine, make_session_factory
from backend.db.repository import ExperimentRepository

# Use in-memory SQLite for testing
TEST_DB_URL = "sqlite+aiosqlite:///:memory:"


@pytest_asyncio.fixture
async def session():
    engine = make_engine(TEST_DB_URL)
    async with engine.begin() as conn:
        await conn.run_sync(Base.metadata.create_all)
    async with make_session_factory(engine)() as s:
        yield s
    await engine.dispose()


def _row(seed: int, adapter: str, value: float) -> ExperimentRow:
    return ExperimentRow(
        seed=seed,
        family="swap_rich",
        num_qubits=3,
        depth=20,
        cost_model="spin_d1",
        adapter=adapter,
        label=adapter if adapter != "sat" else "SAT-R",
        objective="idle",
        sum_log_fidelity=-0.02,
        makespan_ns=500.0,
        idle_ns=400.0,
        hellinger=0.93,
        objective_value=value,
        idle_reduction=0.4 if adapter == "sat" else 0.0,
    )


@pytest.mark.asyncio
async def test_run_persistence(session):
    repo = ExperimentRepository(session)
    cfg = ExperimentConfig(family="swap_rich", cost_model="D1", seeds=[0, 1])

    await repo.save_run("run-1", cfg)
    saved = await repo.get_run("run-1")
    assert saved is not None
    assert saved["status"] == "initialized"
    assert saved["config"] == cfg

    # upsert by run_id
    await repo.save_run("run-1", cfg, status="failed", error="solver budget exhausted")
    saved = await repo.get_run("run-1")
    assert saved["status"] == "failed"
    assert saved["error"] == "solver budget exhausted"

    assert await repo.get_run("missing") is None


@pytest.mark.asyncio
async def test_rows_round_trip(session):
    repo = ExperimentRepository(session)
    await repo.save_run("run-2", ExperimentConfig())
    rows = [_row(0, "direct", -0.2), _row(0, "sat", -0.1), _row(1, "direct", -0.3)]
    assert await repo.add_rows("run-2", rows) == 3

    stored = await repo.get_rows("run-2")
    assert stored == rows
    assert await repo.get_rows("other") == []


@pytest.mark.asyncio
async def test_list_runs(session):
    repo = ExperimentRepository(session)
    for i in range(3):
        await repo.save_run(f"run-{i}", ExperimentConfig(), status="completed")
    runs = await repo.list_runs(limit=2)
    assert len(runs) == 2
    assert {r["status"] for r in runs} == {"completed"}
    assert all(r["family"] == "template" for r in runs)


@pytest.mark.asyncio
async def test_engine_for_sqlite_urls(tmp_path):
    memory = make_engine(TEST_DB_URL)
    assert isinstance(memory.pool, StaticPool)
    await memory.dispose()

    path = tmp_path / "nested" / "runs.db"
    engine = make_engine(f"sqlite+aiosqlite:///{path}")
    assert path.parent.is_dir()
    async with engine.begin() as conn:
        await conn.run_sync(Base.metadata.create_all)
    async with make_session_factory(engine)() as s:
        repo = ExperimentRepository(s)
        await repo.save_run("run-file", ExperimentConfig())
        assert (await repo.get_run("run-file"))["status"] == "initialized"
    await engine.dispose()
    assert path.exists()
