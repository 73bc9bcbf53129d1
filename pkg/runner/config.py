"""
Runner configuration: loads .env from the project root and exposes defaults.
"""
import os
from pathlib import Path

from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).parent.parent

load_dotenv(PROJECT_ROOT / ".env")


def _optional_int(name: str):
    value = os.environ.get(name, "").strip()
    return int(value) if value else None


# Truncation
TRUNCATION = int(os.environ.get("INCLUSION_TRUNCATION", "24"))
GUARD = _optional_int("INCLUSION_GUARD")

# Solver and field checks
TOLERANCE = float(os.environ.get("INCLUSION_TOLERANCE", "1e-8"))
BOUNDARY_EPSILON = float(os.environ.get("INCLUSION_BOUNDARY_EPSILON", "1e-3"))

# Oracle
ORACLE_NODES = int(os.environ.get("INCLUSION_ORACLE_NODES", "256"))
ORACLE_TOLERANCE = float(os.environ.get("INCLUSION_ORACLE_TOLERANCE", "1e-3"))

# Output
OUTPUT_DIR = Path(os.environ.get("INCLUSION_OUTPUT_DIR", "output"))
LOG_LEVEL = os.environ.get("INCLUSION_LOG_LEVEL", "INFO")

CONFIGS_DIR = PROJECT_ROOT / "configs"
