# qpdl/config.py

import configparser
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from rich.logging import RichHandler

load_dotenv()

# ===============================
# Desk defaults
# ===============================

GOLDEN_OMEGA = 2.0 * math.pi * (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_GAMMA = 0.1
DEFAULT_TAU = 2.0
DEFAULT_K_CHECK = 200

SIGMA = 1.0 / 200.0
N_MIN = 20
# unscaled, the band ε^σ/|k|^τ covers almost the whole spectrum at desk ε₀
NONRESONANCE_BAND_SCALE = 0.1
SIN_XI_BAND_SCALE = 0.05
EPS_STAR = 0.2
DEFAULT_RADIUS = 0.5

CONTRACT_LIMITS = {
    "unitarity_drift": 1e-10,
    "conjugacy_residual": 1e-8,
    "l2_drift": 1e-8,
    "frame_deviation": 0.1,
    "roundtrip_error": 0.05,
    "bound_violations": 0.5,
    "bootstrap_margin": 1.0,
    "lost_mass": 1e-3,
}

CONFIG_SECTIONS = ("frequency", "potential", "schedule", "grid", "tolerances", "run")


# ===============================
# Environment
# ===============================

def max_workers() -> int:
    raw = os.getenv("QPDL_THREADS")
    default = min(8, os.cpu_count() or 1)

    if raw is None or raw.strip() == "":
        return default

    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"QPDL_THREADS must be a positive integer, got {raw!r}")

    if value < 1:
        raise ValueError(f"QPDL_THREADS must be a positive integer, got {value}")
    return value


def configure_logging(level: Optional[str] = None) -> None:
    level_name = (level or os.getenv("QPDL_LOG_LEVEL") or "INFO").upper()
    numeric = logging.getLevelName(level_name)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level {level_name!r}")

    root = logging.getLogger("qpdl")
    root.setLevel(numeric)
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        handler = RichHandler(show_path=False, rich_tracebacks=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)


# ===============================
# Run-config file
# ===============================

def _coerce(raw: str) -> Any:
    text = raw.strip()
    if "," in text:
        return [_coerce(part) for part in text.split(",") if part.strip()]
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("none", "null", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_config_file(path: Path) -> Dict[str, Dict[str, Any]]:
    """
    Parse a flat key=value file with [section] headers into nested dicts.

    Keys outside any section are not allowed; unknown sections raise
    ValueError so typos do not silently fall back to defaults.
    """
    if not path.exists():
        raise ValueError(f"Config file not found: {path}")

    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ValueError(f"Malformed config file {path}: {e}")

    sections: Dict[str, Dict[str, Any]] = {}
    for name in parser.sections():
        if name not in CONFIG_SECTIONS:
            raise ValueError(f"Unknown config section [{name}] in {path}")
        sections[name] = {k: _coerce(v) for k, v in parser.items(name)}
    return sections


def merge_overrides(
    sections: Dict[str, Dict[str, Any]],
    overrides: Dict[str, Dict[str, Any]],
) -> Dict[str, Dict[str, Any]]:
    merged = {name: dict(values) for name, values in sections.items()}
    for name, values in overrides.items():
        target = merged.setdefault(name, {})
        for key, value in values.items():
            if value is not None:
                target[key] = value
    return merged
