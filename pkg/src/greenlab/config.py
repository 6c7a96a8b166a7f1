"""Flat ``key = value`` experiment configuration.

Example::

    scenario = oracle-agreement
    n_points = 256
    length = 2.0
    horizon = 1.0
    control_centers = 0.4
    control_widths = 0.4

Lines starting with ``#`` or ``;`` are comments. Keys are case-insensitive.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config"]

_SECTION = "lab"


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _floats(text: str) -> tuple[float, ...]:
    items = [t for t in text.replace(",", " ").split() if t]
    try:
        return tuple(float(t) for t in items)
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple[str, ...]
    n_points: int = 256
    length: float = 2.0
    horizon: float = 1.0
    dt: float | None = None
    t_neg: float = -0.3
    potential: str = "zero"
    control_kind: str = "sin2"
    control_count: int = 1
    control_centers: tuple[float, ...] = (0.4,)
    control_widths: tuple[float, ...] = (0.4,)
    control_amplitude: float = 1.0
    family_count: int = 20
    tolerance: float | None = None
    output_dir: str = "lab_output"
    seed: int = 0
    override_guard: bool = False

    @property
    def h(self) -> float:
        return self.length / (self.n_points - 1)

    @property
    def time_step(self) -> float:
        return self.h / 2 if self.dt is None else self.dt

    def potential_matrix(self) -> np.ndarray:
        """Constant 2x2 Hermitian potential described by ``potential``.

        Accepted forms: ``zero``, ``scalar c``, ``diag a b``,
        ``hermitian a11 a22 re12 im12``.
        """
        parts = self.potential.split()
        kind, nums = parts[0].lower(), _floats(" ".join(parts[1:]))
        if kind == "zero" and not nums:
            return np.zeros((2, 2), dtype=complex)
        if kind == "scalar" and len(nums) == 1:
            return nums[0] * np.eye(2, dtype=complex)
        if kind == "diag" and len(nums) == 2:
            return np.diag(nums).astype(complex)
        if kind == "hermitian" and len(nums) == 4:
            a, d, re, im = nums
            return np.array([[a, re + 1j * im], [re - 1j * im, d]])
        raise ConfigError(f"cannot parse potential {self.potential!r}")

    def bump_specs(self) -> list[tuple[float, float]]:
        """``(center, width)`` of each configured control bump."""
        cs, ws = self.control_centers, self.control_widths
        n = self.control_count
        if len(cs) not in (1, n) or len(ws) not in (1, n):
            raise ConfigError("control_centers/control_widths must hold 1 or control_count values")
        return [(cs[k if len(cs) > 1 else 0], ws[k if len(ws) > 1 else 0]) for k in range(n)]

    def max_support(self) -> float:
        return max(self.control_widths)

    def validate(self) -> ExperimentConfig:
        if not self.scenarios:
            raise ConfigError("no scenario given")
        if self.n_points < 32:
            raise ConfigError(f"n_points must be at least 32, got {self.n_points}")
        if self.length <= 0:
            raise ConfigError("length must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if self.t_neg > 0:
            raise ConfigError("t_neg must be non-positive")
        if self.control_kind not in ("sin2", "sin4"):
            raise ConfigError(f"unknown control_kind {self.control_kind!r}")
        if self.control_count < 1 or self.family_count < 1:
            raise ConfigError("control counts must be positive")
        if any(w <= 0 for w in self.control_widths):
            raise ConfigError("control widths must be positive")
        for c, w in self.bump_specs():
            if c - w / 2 <= 0 or c + w / 2 > self.horizon:
                raise ConfigError(f"bump centered at {c} with width {w} leaves (0, horizon]")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        reach = self.horizon + self.max_support()
        if reach >= self.length and not self.override_guard:
            raise ConfigError(
                f"finite-speed guard: horizon + max control support = {reach:g} must stay below "
                f"length = {self.length:g} (set override_guard = true to run anyway)"
            )
        self.potential_matrix()
        return self

    def with_size(self, n_points: int) -> ExperimentConfig:
        return replace(self, n_points=int(n_points)).validate()

    def with_scenario(self, name: str) -> ExperimentConfig:
        return replace(self, scenarios=(name,))

    def echo(self) -> dict:
        out = asdict(self)
        out["scenarios"] = list(self.scenarios)
        out["control_centers"] = list(self.control_centers)
        out["control_widths"] = list(self.control_widths)
        return out


_CASTS = {
    "n_points": int,
    "length": float,
    "horizon": float,
    "dt": float,
    "t_neg": float,
    "potential": str,
    "control_kind": str,
    "control_count": int,
    "control_centers": _floats,
    "control_widths": _floats,
    "control_amplitude": float,
    "family_count": int,
    "tolerance": float,
    "output_dir": str,
    "seed": int,
    "override_guard": _bool,
}
_ALIASES = {"n": "n_points", "x": "length", "t": "horizon"}


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if parser.sections() != [_SECTION]:
        raise ConfigError("sections are not supported; use flat key = value lines")
    values = {}
    for raw_key, raw in parser[_SECTION].items():
        key = _ALIASES.get(raw_key, raw_key)
        if key == "scenario":
            values["scenarios"] = tuple(dict.fromkeys(s.strip() for s in raw.split(",") if s.strip()))
            continue
        if key not in _CASTS:
            raise ConfigError(f"unknown config key {raw_key!r}")
        if key in values:
            raise ConfigError(f"duplicate config key {raw_key!r}")
        try:
            values[key] = _CASTS[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {raw_key!r}: {raw!r}") from exc
    if "scenarios" not in values:
        raise ConfigError("missing required key 'scenario'")
    if "control_centers" in values and "control_count" not in values:
        values["control_count"] = len(values["control_centers"])
    return ExperimentConfig(**values).validate()


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
