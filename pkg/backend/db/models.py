"""
SQLAlchemy models for the adaptation toolkit.
Define the database schema for persisting benchmark runs and their rows.
"""

# pylint: disable=unsubscriptable-object,too-few-public-methods

from datetime import datetime

from sqlalchemy import JSON, DateTime, Float, ForeignKey, Integer, String
from sqlalchemy.orm import Mapped, mapped_column, relationship

from backend.db.connection import Base


class ExperimentRunModel(Base):
    """Stores one experiment sweep and its configuration."""

    __tablename__ = "experiment_runs"

    run_id: Mapped[str] = mapped_column(String, primary_key=True)
    family: Mapped[str] = mapped_column(String, index=True)
    status: Mapped[str] = mapped_column(String, default="initialized")
    # Serialized ExperimentConfig
    config: Mapped[dict] = mapped_column(JSON, default=dict)
    error: Mapped[str] = mapped_column(String, nullable=True)
    created_at: Mapped[datetime] = mapped_column(DateTime, default=datetime.utcnow)
    updated_at: Mapped[datetime] = mapped_column(
        DateTime, default=datetime.utcnow, onupdate=datetime.utcnow
    )

    rows: Mapped[list["ExperimentRowModel"]] = relationship(
        "ExperimentRowModel", back_populates="run", cascade="all, delete-orphan"
    )


class ExperimentRowModel(Base):
    """One CSV row of an experiment run."""

    __tablename__ = "experiment_rows"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    run_id: Mapped[str] = mapped_column(ForeignKey("experiment_runs.run_id"), index=True)
    seed: Mapped[int] = mapped_column(Integer)
    adapter: Mapped[str] = mapped_column(String)
    objective: Mapped[str] = mapped_column(String)
    objective_value: Mapped[float] = mapped_column(Float)
    # Full ExperimentRow dump, the source of truth for exports
    data: Mapped[dict] = mapped_column(JSON, default=dict)

    run: Mapped["ExperimentRunModel"] = relationship(
        "ExperimentRunModel", back_populates="rows"
    )
