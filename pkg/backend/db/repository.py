"""
Repository pattern for separating data access from business logic.
Handles conversion between Domain Models (Pydantic) and Persistence Models (SQLAlchemy).
"""

from sqlalchemy import select
from sqlalchemy.ext.asyncio import AsyncSession

from backend.adaptation.bench import ExperimentConfig, ExperimentRow
from backend.db.models import ExperimentRowModel, ExperimentRunModel


class ExperimentRepository:
    """Repository for experiment runs and their result rows."""

    def __init__(self, session: AsyncSession):
        """
        Initializes the repository with a database session.
        Args:
            session: The asynchronous database session.
        """
        self.session = session

    async def save_run(
        self,
        run_id: str,
        cfg: ExperimentConfig,
        status: str = "initialized",
        error: str | None = None,
    ) -> None:
        """
        Persists a run record. Upserts based on run_id.
        """
        existing = await self.session.get(ExperimentRunModel, run_id)
        if existing:
            existing.status = status
            existing.config = cfg.model_dump(mode="json")
            existing.error = error
        else:
            self.session.add(
                ExperimentRunModel(
                    run_id=run_id,
                    family=cfg.family,
                    status=status,
                    config=cfg.model_dump(mode="json"),
                    error=error,
                )
            )
        await self.session.commit()

    async def add_rows(self, run_id: str, rows: list[ExperimentRow]) -> int:
        """Appends result rows to a run. Returns the number stored."""
        for row in rows:
            self.session.add(
                ExperimentRowModel(
                    run_id=run_id,
                    seed=row.seed,
                    adapter=row.adapter,
                    objective=row.objective,
                    objective_value=row.objective_value,
                    data=row.model_dump(mode="json"),
                )
            )
        await self.session.commit()
        return len(rows)

    async def get_run(self, run_id: str) -> dict | None:
        run = await self.session.get(ExperimentRunModel, run_id)
        if run is None:
            return None
        return {
            "run_id": run.run_id,
            "family": run.family,
            "status": run.status,
            "config": ExperimentConfig.model_validate(run.config),
            "error": run.error,
            "created_at": run.created_at,
            "updated_at": run.updated_at,
        }

    async def list_runs(self, limit: int = 10) -> list[dict]:
        """
        Lists recent runs, newest first.
        """
        stmt = (
            select(ExperimentRunModel)
            .order_by(ExperimentRunModel.updated_at.desc())
            .limit(limit)
        )
        result = await self.session.execute(stmt)
        return [
            {
                "run_id": r.run_id,
                "family": r.family,
                "status": r.status,
                "created_at": r.created_at,
                "updated_at": r.updated_at,
            }
            for r in result.scalars().all()
        ]

    async def get_rows(self, run_id: str) -> list[ExperimentRow]:
        stmt = (
            select(ExperimentRowModel)
            .where(ExperimentRowModel.run_id == run_id)
            .order_by(ExperimentRowModel.id)
        )
        result = await self.session.execute(stmt)
        return [ExperimentRow.model_validate(r.data) for r in result.scalars().all()]
