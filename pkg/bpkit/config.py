"""Environment configuration for the bpkit command-line tool."""
import logging
import os

from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("BPKIT_LOG_LEVEL", "WARNING").upper()
if not isinstance(logging.getLevelName(LOG_LEVEL), int):
    raise ValueError(f"BPKIT_LOG_LEVEL={LOG_LEVEL!r} is not a logging level")

LOG_FILE = os.getenv("BPKIT_LOG_FILE") or None
DEBUG = os.getenv("BPKIT_DEBUG", "False").lower() == "true"

# Exact enumeration is refused above this many joint states
ORACLE_MAX_JOINT_STATES = 2 ** 24
