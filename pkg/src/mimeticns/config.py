"""Run configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .verification import KOVASZNAY_DOMAIN, KOVASZNAY_NU

OUTPUT_DIR_ENV = "MIMETICNS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "mimeticns-output"

CASES = ("kovasznay", "cavity", "custom")
SWEEPS = ("p", "h")


class ConfigError(ValueError):
    pass


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR


@dataclass
class RunConfig:
    """Everything one CLI invocation needs.

    ``custom`` runs a free stream ``(u_inf, v_inf)`` through the box given by
    the range fields.  The Kovasznay and cavity cases fix their own domains
    unless the range fields are set explicitly.
    """

    case: str = "kovasznay"
    nel_x: int = 2
    nel_y: int = 2
    order: int = 6
    nu: float | None = None
    re: float | None = None
    x_min: float | None = None
    x_max: float | None = None
    y_min: float | None = None
    y_max: float | None = None
    lid_velocity: float = -1.0
    u_inf: float = 1.0
    v_inf: float = 0.0
    tol: float = 1e-10
    max_iter: int = 400
    relax: float = 0.7
    convection: bool = True
    sweep: str = "p"
    orders: tuple = (2, 4, 6, 8, 10)
    nels: tuple = (1, 2, 4, 8)
    lattice: int = 101
    timings: bool = False
    output_dir: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {', '.join(CASES)}, got {self.case!r}")
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be 'p' or 'h', got {self.sweep!r}")
        for name in ("nel_x", "nel_y", "order", "max_iter", "lattice"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.lattice < 2:
            raise ConfigError("lattice needs at least 2 points per direction")
        for name in ("nu", "re"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.nu is not None and self.re is not None:
            raise ConfigError("give either nu or re, not both")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not 0.0 < self.relax <= 1.0:
            raise ConfigError("relax must lie in (0, 1]")
        if not self.orders or any(p < 1 for p in self.orders):
            raise ConfigError("orders must be a nonempty list of positive integers")
        if not self.nels or any(n < 1 for n in self.nels):
            raise ConfigError("nels must be a nonempty list of positive integers")
        lo_hi = [(self.x_min, self.x_max), (self.y_min, self.y_max)]
        for lo, hi in lo_hi:
            if (lo is None) != (hi is None):
                raise ConfigError("domain bounds come in pairs")
            if lo is not None and not hi > lo:
                raise ConfigError(f"empty domain interval [{lo}, {hi}]")

    @property
    def viscosity(self) -> float:
        if self.nu is not None:
            return self.nu
        if self.re is not None:
            speed = abs(self.lid_velocity) if self.case == "cavity" else 1.0
            return speed / self.re
        return KOVASZNAY_NU if self.case == "kovasznay" else 1e-3

    @property
    def domain(self) -> tuple:
        if self.case == "kovasznay":
            (x0, x1), (y0, y1) = KOVASZNAY_DOMAIN
        else:
            x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
        if self.x_min is not None:
            x0, x1 = self.x_min, self.x_max
        if self.y_min is not None:
            y0, y1 = self.y_min, self.y_max
        return (x0, x1), (y0, y1)

    @property
    def out_path(self) -> Path:
        return Path(self.output_dir or default_output_dir())


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT = {"nel_x", "nel_y", "order", "max_iter", "lattice"}
_FLOAT = {"nu", "re", "x_min", "x_max", "y_min", "y_max", "lid_velocity", "u_inf", "v_inf",
          "tol", "relax"}
_BOOL = {"convection", "timings"}
_INT_LIST = {"orders", "nels"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_value(key: str, text: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    text = text.strip()
    try:
        if key in _INT:
            return int(text)
        if key in _FLOAT:
            return None if text in ("", "none") else float(text)
        if key in _BOOL:
            return _parse_bool(text)
        if key in _INT_LIST:
            return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"malformed value for {key}: {text!r}") from exc
    return text


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_config_text(text: str) -> dict:
    """Key/value pairs of a config file; later keys win."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            out[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    return RunConfig(**parse_config_text(text))


def merge(defaults: RunConfig, *layers: dict) -> RunConfig:
    """Apply override layers in order, later layers taking precedence."""
    values = dataclasses.asdict(defaults)
    for layer in layers:
        values.update(layer)
    return RunConfig(**values)
