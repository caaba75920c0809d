"""
Logging utilities for the adaptation toolkit.
Provides run-specific file logs and structured logging of solver calls.
"""

import json
import logging
import os
from datetime import datetime
from typing import Any

from backend import config

FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def get_run_logger(run_id: str) -> logging.Logger:
    """
    Returns a logger writing to a run-specific file under ADAPT_LOG_DIR.
    Creates the log directory if it doesn't exist.
    """
    log_dir = config.ADAPT_LOG_DIR
    os.makedirs(log_dir, exist_ok=True)

    logger_name = f"adapt_run_{run_id}"
    logger = logging.getLogger(logger_name)

    # Avoid adding multiple handlers if the logger already has them
    if not logger.handlers:
        logger.setLevel(logging.INFO)
        formatter = logging.Formatter(FORMAT)

        file_handler = logging.FileHandler(os.path.join(log_dir, f"{logger_name}.log"))
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    return logger


def _serialize(obj: Any) -> Any:
    try:
        if hasattr(obj, "model_dump"):
            return obj.model_dump(mode="json")
        if isinstance(obj, dict):
            return {str(k): _serialize(v) for k, v in obj.items()}
        if isinstance(obj, list | tuple):
            return [_serialize(v) for v in obj]
        if isinstance(obj, str | int | float | bool) or obj is None:
            return obj
        return str(obj)
    except (ValueError, TypeError, AttributeError):
        return str(obj)


def truncate_long_values(obj: Any, max_length: int = 200, max_items: int = 20) -> Any:
    """Recursively shortens long strings and long lists in nested structures."""
    if isinstance(obj, dict):
        return {k: truncate_long_values(v, max_length, max_items) for k, v in obj.items()}
    if isinstance(obj, list):
        head = [truncate_long_values(item, max_length, max_items) for item in obj[:max_items]]
        if len(obj) > max_items:
            head.append(f"... [truncated {len(obj) - max_items} items]")
        return head
    if isinstance(obj, str) and len(obj) > max_length:
        return obj[:max_length] + f"... [truncated {len(obj) - max_length} chars]"
    return obj


def log_solver_call(
    logger: logging.Logger, stage: str, payload: Any, result: Any
) -> None:
    """Logs one pipeline stage's request and response as a JSON line."""
    log_entry = {
        "timestamp": datetime.now().isoformat(),
        "stage": stage,
        "request": truncate_long_values(_serialize(payload)),
        "response": truncate_long_values(_serialize(result)),
    }
    logger.info("SOLVER_CALL: %s", json.dumps(log_entry, default=str))
