"""
Runtime configuration read from the environment (and an optional .env file).
"""
import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


@dataclass(frozen=True)
class Settings:
    threads: int
    steps: int
    rank_tolerance: float
    log_level: str
    port: int


def load_settings() -> Settings:
    """
    Build the settings object from ROLLHOL_* environment variables.

    Returns:
        Settings with defaults filled in for anything not set
    """
    threads = int(os.getenv('ROLLHOL_THREADS', '1'))
    return Settings(
        threads=max(1, threads),
        steps=int(os.getenv('ROLLHOL_STEPS', '512')),
        rank_tolerance=float(os.getenv('ROLLHOL_RANK_TOL', '1e-6')),
        log_level=os.getenv('ROLLHOL_LOG_LEVEL', 'INFO').upper(),
        port=int(os.getenv('PORT', '5000')),
    )
