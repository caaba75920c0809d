"""
Utility to initialize the database schema.
Creates all tables defined in models.py if they don't already exist.
"""

import asyncio
import logging

from sqlalchemy.exc import DBAPIError

# Import models to ensure they are registered with Base.metadata
# pylint: disable=unused-import
from backend.db import models  # noqa: F401
from backend.db.connection import Base, engine

logger = logging.getLogger(__name__)


async def init_db() -> bool:
    """
    Creates all tables in the database asynchronously.
    """
    logger.info("Initializing database at: %s", engine.url.render_as_string(hide_password=True))
    for _ in range(3):
        try:
            async with engine.begin() as conn:
                await conn.run_sync(Base.metadata.create_all)
            logger.info("Database initialization complete.")
            return True
        except DBAPIError as e:
            logger.warning("Database not ready yet, retrying... (%s)", e)
            await asyncio.sleep(1)
    logger.error("Failed to initialize database after multiple retries.")
    return False


if __name__ == "__main__":
    asyncio.run(init_db())
