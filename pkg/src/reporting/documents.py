"""
Structured YAML summaries (audit reports, simulation summaries).
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import yaml

logger = logging.getLogger(__name__)


def to_plain(value: Any) -> Any:
    """Nested builtin types with floats rounded to 13 significant digits."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return to_plain(value.value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if not np.isfinite(v) else float(f"{v:.12e}")
    if isinstance(value, Path):
        return str(value)
    return value


def dump_document(data: Dict) -> str:
    return yaml.safe_dump(to_plain(data), sort_keys=False, default_flow_style=False, allow_unicode=True)


def write_document(path: Union[str, Path], data: Dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_document(data))
    logger.info(f"Wrote {path}")
    return path


def read_document(path: Union[str, Path]) -> Dict:
    with open(path) as f:
        return yaml.safe_load(f) or {}
