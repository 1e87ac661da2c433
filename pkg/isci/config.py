import os
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("ISCI_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

DEFAULT_EPS = float(os.getenv("ISCI_EPS", "1e-8"))
DEFAULT_MAX_ITER = int(os.getenv("ISCI_MAX_ITER", "10000"))
DEFAULT_SEED = int(os.getenv("ISCI_SEED", "42"))

# Worker processes for simulations; 0 means all cores
THREADS = int(os.getenv("ISCI_THREADS", "0"))

# Absolute tolerances shared by the graph algebra
SUM_TOL = 1e-12
CONSERVATION_TOL = 1e-10


def resolve_threads(requested=None):
    n = requested if requested is not None else THREADS
    if n is None or n <= 0:
        n = os.cpu_count() or 1
    return n
