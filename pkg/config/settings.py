import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Base directories
BASE_DIR = Path(__file__).parent.parent
INSTANCES_DIR = BASE_DIR / "storage" / "instances"
EXPERIMENT_FILE = BASE_DIR / "config" / "experiment.json"

# Enumeration guards
ENUMERATION_LIMIT = int(os.getenv("BI_ENUMERATION_LIMIT", 10**6))
SEARCH_LIMIT = int(os.getenv("BI_SEARCH_LIMIT", 10**7))
# exact threshold enumeration in the game oracle only when scenarios * draws stays below this
GAME_SCENARIO_LIMIT = int(os.getenv("BI_GAME_SCENARIO_LIMIT", 4096))

# Numerical tolerances
TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12
PROBABILITY_TOLERANCE = 1e-12
HOEFFDING_DELTA = 0.05

# Online allocation
DEFAULT_ALPHA = 0.4
DEFAULT_P_SECRETARY = 0.375
DEFAULT_TRIALS = 2000

# Offline solver
DEFAULT_ENUM_DEPTH = 3

# Monte Carlo / game
DEFAULT_SAMPLES = 1000
DEFAULT_GAME_SAMPLES = 8
DEFAULT_STARTS = 4
DEFAULT_MAX_ITERS = 50

LOG_LEVEL = os.getenv("BI_LOG_LEVEL", "WARNING")
