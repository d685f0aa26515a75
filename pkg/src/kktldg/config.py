"""Flat ``key = value`` run configuration with typed parsing."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .ldg import FLUX_CHOICES, QUADRATURE_CHOICES
from .model import PRESET_NAMES, preset


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Settings of one run.  ``None`` entries are filled from the preset by :meth:`resolved`."""

    preset: str = "porous1d"
    mass: float = 1.0
    elements: tuple | None = None
    degree: int | None = None
    dirk_order: int | None = None
    alpha: float | None = None
    tau_max: float | None = None
    tau_min: float | None = None
    final_time: float | None = None
    u_min: float | None = None
    limiter: bool = True
    flux: str = "right_q_left_p"
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    newton_line_search: bool = False
    quad_points: int | None = None
    constraint_points: int | None = None
    admissibility: str = "floor"
    quadrature: str = "gauss"
    blowup_threshold: float = 1e6
    output_dir: str | None = None
    seed: int = 0

    def resolved(self) -> "RunConfig":
        """Copy with every preset-dependent default filled in."""
        if self.preset not in PRESET_NAMES:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESET_NAMES)}")
        p = preset(self.preset, self.mass)
        elements = p.elements if self.elements is None else tuple(self.elements)
        if len(elements) == 1 and p.problem.dim == 2:
            elements = elements * 2
        if len(elements) != p.problem.dim:
            raise ConfigError(f"elements {elements} do not match dimension {p.problem.dim}")
        degree = p.degree if self.degree is None else self.degree
        alpha = p.alpha if self.alpha is None else self.alpha
        lo, hi = _bounds_of(p.problem.bounds, p.problem.dim)[0]
        h = (hi - lo) / elements[0]
        tau_max = alpha * h if self.tau_max is None else self.tau_max
        out = replace(
            self,
            elements=elements,
            degree=degree,
            dirk_order=p.dirk_order if self.dirk_order is None else self.dirk_order,
            alpha=alpha,
            tau_max=tau_max,
            tau_min=tau_max * 2.0**-12 if self.tau_min is None else self.tau_min,
            final_time=p.final_time if self.final_time is None else self.final_time,
            u_min=p.u_min if self.u_min is None else self.u_min,
        )
        out.validate()
        return out

    def validate(self) -> None:
        if self.flux not in FLUX_CHOICES:
            raise ConfigError(f"flux must be one of {FLUX_CHOICES}")
        if self.quadrature not in QUADRATURE_CHOICES:
            raise ConfigError(f"quadrature must be one of {QUADRATURE_CHOICES}")
        if self.admissibility not in ("floor", "strict"):
            raise ConfigError("admissibility must be 'floor' or 'strict'")
        if self.degree is not None and not 0 <= self.degree <= 6:
            raise ConfigError("degree must be between 0 and 6")
        if self.dirk_order is not None and self.dirk_order not in (1, 2, 3, 4):
            raise ConfigError("dirk_order must be 1, 2, 3 or 4")
        if self.elements is not None and any(int(e) < 1 for e in self.elements):
            raise ConfigError("element counts must be positive")
        for name in ("alpha", "tau_max", "tau_min", "final_time", "u_min", "newton_tol", "mass"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if self.tau_min is not None and self.tau_max is not None and self.tau_min > self.tau_max:
            raise ConfigError("tau_min exceeds tau_max")
        if self.newton_max_iter < 1:
            raise ConfigError("newton_max_iter must be >= 1")

    def manifest(self) -> str:
        lines = ["# kktldg run manifest v1"]
        for f in fields(self):
            if f.name == "output_dir":
                continue
            lines.append(f"{f.name} = {format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _bounds_of(bounds, dim):
    if dim == 1:
        return [tuple(bounds)]
    return [tuple(b) for b in bounds]


def format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, tuple):
        return "x".join(str(int(e)) for e in v)
    return str(v)


_TYPES = {
    "preset": str,
    "mass": float,
    "elements": "elements",
    "degree": int,
    "dirk_order": int,
    "alpha": float,
    "tau_max": float,
    "tau_min": float,
    "final_time": float,
    "u_min": float,
    "limiter": bool,
    "flux": str,
    "newton_tol": float,
    "newton_max_iter": int,
    "newton_line_search": bool,
    "quad_points": int,
    "constraint_points": int,
    "admissibility": str,
    "quadrature": str,
    "blowup_threshold": float,
    "output_dir": str,
    "seed": int,
}


def parse_value(key: str, text: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = _TYPES[key]
    text = text.strip()
    if text.lower() == "none":
        return None
    try:
        if kind == "elements":
            parts = text.lower().replace(",", "x").split("x")
            return tuple(int(p) for p in parts if p.strip())
        if kind is bool:
            low = text.lower()
            if low in ("true", "on", "yes", "1"):
                return True
            if low in ("false", "off", "no", "0"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def parse_config(text: str, overrides=()) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, val)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, val = (s.strip() for s in item.split("=", 1))
        values[key] = parse_value(key, val)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def load_config(path, overrides=()) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)
