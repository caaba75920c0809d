"""
Configuration settings for the circuit adaptation toolkit.
Loads environment variables and defines solver, simulator and storage constants.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Resolve project root (one level up from backend/)
ROOT_DIR = Path(__file__).parent.parent
env_path = ROOT_DIR / ".env"

if env_path.exists():
    load_dotenv(dotenv_path=env_path)
else:
    load_dotenv()  # Fallback


def _env_flag(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).strip().lower() in {"1", "true", "yes", "on"}


# Cost model: bundled preset id (spin_d0 / spin_d1) or a path to a JSON file
ADAPT_COST_MODEL = os.getenv("ADAPT_COST_MODEL", "spin_d0")
# T1 = factor * T2 when a cost model file does not give t1_ns
ADAPT_T1_FACTOR = float(os.getenv("ADAPT_T1_FACTOR", "1000"))
ADAPT_ENABLE_DIABATIC = _env_flag("ADAPT_ENABLE_DIABATIC")

ADAPT_SOLVER_NODE_LIMIT = int(os.getenv("ADAPT_SOLVER_NODE_LIMIT", "2000000"))
ADAPT_SOLVER_MAX_MATCHES = int(os.getenv("ADAPT_SOLVER_MAX_MATCHES", "4096"))

SIM_MAX_QUBITS = int(os.getenv("SIM_MAX_QUBITS", "5"))

ADAPT_LOG_DIR = os.getenv("ADAPT_LOG_DIR", "logs")
DATABASE_URL = os.getenv("DATABASE_URL", "sqlite+aiosqlite:///./experiments.db")
