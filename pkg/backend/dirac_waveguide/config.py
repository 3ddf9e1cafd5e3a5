from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv


PROJECT_ROOT = Path(__file__).resolve().parents[2]


def _env_int(name: str, default: int) -> int:
    raw = str(os.getenv(name, "") or "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def _env_float(name: str, default: float) -> float:
    raw = str(os.getenv(name, "") or "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        return default


def build_logger(level: str) -> logging.Logger:
    logger = logging.getLogger("dirac_waveguide")
    if not logger.handlers:
        logging.basicConfig(
            level=level,
            format="%(asctime)s %(levelname)s %(name)s - %(message)s",
        )
    else:
        logger.setLevel(level)
    return logger


@dataclass(frozen=True)
class EnvironmentSettings:
    app_env: str
    log_level: str
    output_dir: str
    threads: int
    no_color: bool
    version_override: str


@dataclass(frozen=True)
class SolverDefaults:
    count: int
    tol: float
    max_iter: int
    seed: int
    preconditioner: str


def load_environment_settings() -> EnvironmentSettings:
    load_dotenv()
    log_level = os.getenv("LOG_LEVEL", "INFO").upper()
    return EnvironmentSettings(
        app_env=os.getenv("APP_ENV", "development"),
        log_level=log_level,
        output_dir=os.getenv("DIRAC_OUTPUT_DIR", "results").strip() or "results",
        threads=max(0, _env_int("DIRAC_THREADS", 0)),
        # NO_COLOR 约定：只要存在且非空就关闭颜色
        no_color=bool(str(os.getenv("NO_COLOR", "") or "").strip()),
        version_override=os.getenv("DIRAC_VERSION", "").strip(),
    )


def load_solver_defaults() -> SolverDefaults:
    preconditioner = os.getenv("DIRAC_SOLVER_PRECONDITIONER", "shift_invert").strip().lower()
    if preconditioner not in {"shift_invert", "jacobi", "sgs"}:
        preconditioner = "shift_invert"
    return SolverDefaults(
        count=max(1, _env_int("DIRAC_SOLVER_COUNT", 4)),
        tol=_env_float("DIRAC_SOLVER_TOL", 1e-6),
        max_iter=max(1, _env_int("DIRAC_SOLVER_MAX_ITER", 2000)),
        seed=_env_int("DIRAC_SOLVER_SEED", 0),
        preconditioner=preconditioner,
    )


settings = load_environment_settings()
solver_defaults = load_solver_defaults()
logger = build_logger(settings.log_level)


__all__ = [
    "EnvironmentSettings",
    "PROJECT_ROOT",
    "SolverDefaults",
    "build_logger",
    "load_environment_settings",
    "load_solver_defaults",
    "logger",
    "settings",
    "solver_defaults",
]
