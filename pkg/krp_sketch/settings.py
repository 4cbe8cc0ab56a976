"""
Environment-driven defaults. Values are read once from the process environment
after loading a `.env` file from the working directory (see `.env.dev`).
"""

import os
import dotenv

dotenv.load_dotenv()

DEFAULT_SEED = int(os.getenv("KRP_SEED", "0"))
DEFAULT_DISTRIBUTION = os.getenv("KRP_DISTRIBUTION", "gaussian")
# largest number of float64 scalars an explicit (oracle) materialization may allocate
MEMORY_CAP = int(os.getenv("KRP_MEMORY_CAP", str(2**26)))
DEFAULT_OVERSAMPLE = int(os.getenv("KRP_OVERSAMPLE", "20"))
REPORT_DIR = os.getenv("KRP_REPORT_DIR", "./output/reports")
LOG_LEVEL = os.getenv("KRP_LOG_LEVEL", "WARNING")
