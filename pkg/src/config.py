"""Run configuration: defaults, JSON config files, environment and flags.

Precedence, lowest first: field defaults, environment (``.env`` included),
the ``--config`` JSON file, command-line flags.
"""
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .core_model import JumpDist, ModelParams
from .errors import ParameterError

logger = logging.getLogger(__name__)

WORKERS_ENV = "STRESSRELEASE_WORKERS"
PUSHGATEWAY_ENV = "STRESSRELEASE_PUSHGATEWAY"


def parse_jump(text: str) -> JumpDist:
    """``exp:<rate>`` or ``const:<x0>``."""
    kind, sep, value = str(text).partition(":")
    try:
        number = float(value)
    except ValueError:
        number = None
    if not sep or number is None or kind not in ("exp", "const"):
        raise ParameterError(f"jump distribution must be exp:<rate> or const:<x0>, got {text!r}")
    return JumpDist.exponential(number) if kind == "exp" else JumpDist.deterministic(number)


def parse_grid(spec: Union[str, float, list, tuple]) -> Tuple[float, ...]:
    """``start:stop:step`` (stop included) or a comma-separated list of times."""
    if isinstance(spec, (int, float)):
        return (float(spec),)
    try:
        values = _grid_values(spec)
    except ValueError as e:
        if isinstance(e, ParameterError):
            raise
        raise ParameterError(f"cannot parse time grid {spec!r}: {e}") from e
    if not values:
        raise ParameterError("time grid must be nonempty")
    return values


def _grid_values(spec: Union[str, list, tuple]) -> Tuple[float, ...]:
    if isinstance(spec, (list, tuple)):
        values = tuple(float(v) for v in spec)
    else:
        text = str(spec).strip()
        if text.count(":") == 2:
            start, stop, step = (float(p) for p in text.split(":"))
            if not step > 0 or stop < start:
                raise ParameterError(f"grid {text!r} needs step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9))
            values = tuple(start + i * step for i in range(n + 1))
        else:
            values = tuple(float(p) for p in text.split(",") if p.strip())
    return values


def parse_sizes(spec: Union[str, int, list, tuple]) -> Tuple[int, ...]:
    if isinstance(spec, int):
        sizes = (spec,)
    elif isinstance(spec, (list, tuple)):
        sizes = tuple(int(v) for v in spec)
    else:
        try:
            sizes = tuple(int(p) for p in str(spec).split(",") if p.strip())
        except ValueError as e:
            raise ParameterError(f"cannot parse bench sizes {spec!r}") from e
    if not sizes or any(n <= 0 for n in sizes):
        raise ParameterError(f"bench sizes must be positive, got {spec!r}")
    return sizes


def _env_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        logger.warning(f"ignoring {WORKERS_ENV}={raw!r}")
        return 1


class RunConfig(BaseModel):
    """Options shared by all subcommands; defaults are the moment-curve setup."""

    model_config = ConfigDict(extra="forbid")

    lambda0: float = 1.0
    beta: float = 0.25
    rho: float = 1.25
    jump_self: str = "exp:3"
    jump_ext: str = "exp:10"

    end_time: float = 100.0
    seed: int = Field(default=0, ge=0)
    method: str = "composition"
    delta: Optional[float] = None
    n_paths: int = 10_000
    grid: str = "1,5,10,25,50"
    order: int = 2
    out: Optional[str] = None
    format: str = "csv"

    workers: int = Field(default_factory=_env_workers)
    theory_beta: Optional[float] = None
    sizes: str = "100,1000"
    deltas: str = "0.25,0.5,1,1.86,3,5"
    trials: int = 3
    metrics_out: Optional[str] = None
    pushgateway: Optional[str] = Field(default_factory=lambda: os.environ.get(PUSHGATEWAY_ENV) or None)

    @field_validator("grid", "sizes", "deltas", mode="before")
    @classmethod
    def _join_lists(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return ",".join(str(v) for v in value)
        if isinstance(value, (int, float)):
            return str(value)
        return value

    @field_validator("method")
    @classmethod
    def _known_method(cls, value: str) -> str:
        if value not in ("composition", "thinning", "inverse", "vectorized"):
            raise ValueError(f"unknown method {value!r}")
        return value

    @field_validator("format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in ("csv", "json"):
            raise ValueError(f"unknown format {value!r}")
        return value

    def model_params(self, beta: Optional[float] = None) -> ModelParams:
        return ModelParams(
            lambda0=self.lambda0,
            beta=self.beta if beta is None else beta,
            rho=self.rho,
            jump_self=parse_jump(self.jump_self),
            jump_ext=parse_jump(self.jump_ext),
        )

    def time_grid(self) -> Tuple[float, ...]:
        return parse_grid(self.grid)

    def bench_sizes(self) -> Tuple[int, ...]:
        return parse_sizes(self.sizes)

    def candidate_deltas(self) -> Tuple[float, ...]:
        return parse_grid(self.deltas)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Flat JSON object; keys may use hyphens like the flags."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParameterError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ParameterError(f"config file {path} must hold a JSON object")
    return {str(k).replace("-", "_"): v for k, v in raw.items()}


def load_run_config(config_path: Optional[str], overrides: Mapping[str, Any]) -> RunConfig:
    """Merge the config file with flag values; flags left unset (None) do not override."""
    merged: Dict[str, Any] = read_config_file(config_path) if config_path else {}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.model_validate(merged)
