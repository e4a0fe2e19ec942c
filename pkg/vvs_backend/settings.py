"""
Settings for the variable-viscosity stream-function solver.
"""

from pathlib import Path
import os
from dotenv import load_dotenv  # pip install python-dotenv

# ─── Define BASE_DIR first ───────────────────────────────────────────────
BASE_DIR = Path(__file__).resolve().parent.parent

# ─── Load environment variables from .env file ──────────────────────────
load_dotenv(BASE_DIR / ".env")  # reads .env at startup

# ─── RUNTIME SETTINGS ─────────────────────────────────────────────────────


def _int_from_env(name: str, default: int) -> int:
    raw = os.getenv(name, str(default))
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {name} must be an integer, got {raw!r}.")
    return max(1, value)


# Upper bound on concurrently running solves (mms levels)
VVS_THREADS = _int_from_env("VVS_THREADS", 1)

LOG_LEVEL = os.getenv("VVS_LOG_LEVEL", "INFO").upper()

# Dump the last Oseen matrix (Matrix Market) next to each report
WRITE_MATRIX = os.getenv("VVS_WRITE_MATRIX", "False").lower() in ("true", "1", "yes")

CONFIG_DIR = BASE_DIR / "configs"

# ─── SOLVER DEFAULTS ──────────────────────────────────────────────────────

DEFAULT_OMEGA = 1.0
MIN_OMEGA = 1.0 / 16.0
DEFAULT_TOL_REL = 1e-8
DEFAULT_TOL_ABS = 1e-10
DEFAULT_MAX_ITER = 50
DEFAULT_FLUX_TOL = 1e-8

DELTA_FRACTION = 0.1  # cutoff width / min domain extent
EPS_SPACINGS = 2.0  # mollifier radius / min(h1, h2)
STEP_WIDTH_SPACINGS = 2.0  # ramp width of step closures / min(h1, h2)

LINEAR_RTOL = 1e-10
DIVERGENCE_FACTOR = 1e6
DIVERGENCE_ABS = 1e12  # H² ceiling on any iterate, first one included
APRIORI_SAFETY = 10.0

NEWTON_MAX_STEPS = 50
NEWTON_TOL = 1e-10

CSV_FLOAT_FORMAT = "%.17g"

# ─── LOGGING CONFIGURATION ──────────────────────────────────────────────────

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(levelname)s %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": LOG_LEVEL,
    },
}
