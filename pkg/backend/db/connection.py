"""
Database connection for experiment persistence (SQLAlchemy AsyncEngine).
Defaults to a local SQLite file through aiosqlite; any async URL works.
"""

import logging
from pathlib import Path

from sqlalchemy.engine import make_url
from sqlalchemy.ext.asyncio import AsyncEngine, AsyncSession, async_sessionmaker, create_async_engine
from sqlalchemy.orm import DeclarativeBase
from sqlalchemy.pool import StaticPool

from backend.config import DATABASE_URL

logger = logging.getLogger(__name__)


# pylint: disable=too-few-public-methods
class Base(DeclarativeBase):
    """Base class for SQLAlchemy models."""


def make_engine(url: str = DATABASE_URL) -> AsyncEngine:
    """
    Async engine for a database URL. SQLite connections are shared with the
    threadpool that runs experiments; an in-memory database keeps a single
    connection and a file database gets its directory created.
    """
    parsed = make_url(url)
    if parsed.get_backend_name() != "sqlite":
        return create_async_engine(url, echo=False)
    database = parsed.database or ""
    if database in ("", ":memory:"):
        return create_async_engine(
            url,
            echo=False,
            connect_args={"check_same_thread": False},
            poolclass=StaticPool,
        )
    parent = Path(database).expanduser().parent
    if not parent.exists():
        logger.info("Creating database directory %s", parent)
        parent.mkdir(parents=True, exist_ok=True)
    return create_async_engine(url, echo=False, connect_args={"check_same_thread": False})


def make_session_factory(bind: AsyncEngine) -> async_sessionmaker[AsyncSession]:
    return async_sessionmaker(bind=bind, class_=AsyncSession, expire_on_commit=False)


engine = make_engine()

AsyncSessionLocal = make_session_factory(engine)
