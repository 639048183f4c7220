import logging
import os
import sys
from typing import Any, Dict

import dotenv

DEFAULTS = {
    "SIT_OUTPUT_DIR": "",
    "SIT_THREADS": "1",
    "SIT_LOG_LEVEL": "INFO",
    "SIT_PROGRESS": "1",
}

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_env() -> Dict[str, Any]:
    """
    Load environment variables from the root .env file (if it exists)

    Returns:
        Settings dictionary: output_dir (None when unset), threads, log_level, progress
    """
    root_env_file = ".env"
    if os.path.exists(root_env_file):
        dotenv.load_dotenv(root_env_file)

    values = {key: os.environ.get(key, default) for key, default in DEFAULTS.items()}
    try:
        threads = max(1, int(values["SIT_THREADS"]))
    except ValueError:
        print(f"Warning: SIT_THREADS={values['SIT_THREADS']!r} is not an integer, using 1")
        threads = 1

    return {
        "output_dir": values["SIT_OUTPUT_DIR"] or None,
        "threads": threads,
        "log_level": values["SIT_LOG_LEVEL"].upper(),
        "progress": values["SIT_PROGRESS"].strip().lower() in ("1", "true", "yes", "on"),
    }


def configure_logging(level: str = "INFO") -> None:
    """
    Send log records to stderr with a timestamped format
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))


if __name__ == "__main__":
    settings = setup_env()
    print("Environment variables loaded successfully.")
    for key, value in settings.items():
        print(f"  {key}: {value}")
