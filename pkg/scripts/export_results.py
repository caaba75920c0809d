"""
Script to export the rows of a stored experiment run to a CSV file.
Usage: python scripts/export_results.py <run_id> [output.csv]
"""

import asyncio
import os
import sys

# Add project root to sys.path to ensure backend imports work
sys.path.append(os.getcwd())

from backend.adaptation.bench import write_csv
from backend.db.connection import AsyncSessionLocal
from backend.db.repository import ExperimentRepository


async def export_to_csv(run_id: str, output_file: str | None = None) -> int:
    output_file = output_file or f"experiment_{run_id}.csv"
    async with AsyncSessionLocal() as session:
        repo = ExperimentRepository(session)
        if await repo.get_run(run_id) is None:
            print(f"Run {run_id} not found.")
            return 1
        rows = await repo.get_rows(run_id)
    write_csv(rows, output_file)
    print(f"Exported {len(rows)} rows to {output_file}")
    return 0


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print(__doc__)
        sys.exit(2)
    sys.exit(asyncio.run(export_to_csv(sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else None)))
