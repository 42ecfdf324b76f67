"""Run configuration in a flat ``key = value`` text format.

One key per line, ``#`` starts a comment, blank lines are ignored.  Unknown
keys, missing required keys and malformed values are errors that name the
key and the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .dynamics import StepperConfig
from .model import AppliedField, Grid, ParameterError, Params, validate_params

MODES = ("full", "regularized", "limit")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: Params
    grid: Grid
    stepper: StepperConfig = field(default_factory=StepperConfig)
    mode: str = "full"
    output_dir: str = "output"
    snapshot_every: int = 10
    diagnostics_every: int = 1
    seed: int = 0
    # initial data: projected vortex pair, spin bump, magnetization near equilibrium
    u_amplitude: float = 0.2
    w_amplitude: float = 0.1
    m_perturbation: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.snapshot_every < 1 or self.diagnostics_every < 1:
            raise ConfigError("snapshot_every and diagnostics_every must be >= 1")
        try:
            validate_params(self.params, self.mode)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def _float(text):
    value = float(text)
    if math.isnan(value):
        raise ValueError("nan is not allowed")
    return value


def _optional_float(text):
    return None if text.lower() == "none" else _float(text)


def _complex_list(text):
    return tuple(complex(part.strip().replace(" ", "")) for part in text.split(",") if part.strip())


def _name_set(text):
    return frozenset(part.strip() for part in text.split(",") if part.strip())


def _fmt_complex(c):
    return repr(complex(c)).strip("()")


# key -> (parser, target, attribute); target is params, grid, stepper, field or run
_KEYS = {
    "mode": (str, "run", "mode"),
    "nx": (int, "grid", "nx"),
    "ny": (int, "grid", "ny"),
    "lx": (_float, "grid", "lx"),
    "ly": (_float, "grid", "ly"),
    "t_end": (_float, "params", "t_end"),
    "dt": (_float, "params", "dt"),
    "tau": (_float, "params", "tau"),
    "nu": (_float, "params", "nu"),
    "nu_r": (_float, "params", "nu_r"),
    "c1": (_float, "params", "c1"),
    "c2": (_float, "params", "c2"),
    "mu0": (_float, "params", "mu0"),
    "kappa0": (_float, "params", "kappa0"),
    "sigma": (_float, "params", "sigma"),
    "field_coeffs": (_complex_list, "field", "coeffs"),
    "field_ramp_time": (_optional_float, "field", "ramp_time"),
    "cfl_number": (_float, "stepper", "cfl_number"),
    "picard_tol": (_float, "stepper", "picard_tol"),
    "picard_max_iter": (int, "stepper", "picard_max_iter"),
    "frozen_fields": (_name_set, "stepper", "frozen_fields"),
    "advection": (str, "stepper", "advection"),
    "kelvin_form": (str, "stepper", "kelvin_form"),
    "poisson_method": (str, "stepper", "poisson_method"),
    "poisson_tol": (_float, "stepper", "poisson_tol"),
    "limit_kelvin": (str, "stepper", "limit_kelvin"),
    "output_dir": (str, "run", "output_dir"),
    "snapshot_every": (int, "run", "snapshot_every"),
    "diagnostics_every": (int, "run", "diagnostics_every"),
    "seed": (int, "run", "seed"),
    "u_amplitude": (_float, "run", "u_amplitude"),
    "w_amplitude": (_float, "run", "w_amplitude"),
    "m_perturbation": (_float, "run", "m_perturbation"),
}
REQUIRED = ("mode", "nx", "ny", "t_end", "dt")


def parse_config(text: str) -> RunConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        parser = _KEYS[key][0]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}") from None
        lines[key] = lineno
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key '{key}'")
    mode = values["mode"]
    if mode != "limit" and "tau" not in values:
        raise ConfigError("missing required key 'tau'")
    if mode == "limit":
        values.setdefault("tau", None)

    groups: dict[str, dict] = {"params": {}, "grid": {}, "stepper": {}, "field": {}, "run": {}}
    for key, value in values.items():
        _, target, attr = _KEYS[key]
        groups[target][attr] = value
    try:
        af = AppliedField(**groups["field"])
        params = Params(applied_field=af, **groups["params"])
        grid = Grid(**groups["grid"])
        stepper = StepperConfig(**groups["stepper"])
        return RunConfig(params=params, grid=grid, stepper=stepper, **groups["run"])
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        first = msg.split()[0] if msg else ""
        where = f"line {lines[first]}: " if first in lines else ""
        raise ConfigError(f"{where}{msg}") from None


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config`; floats are written with ``repr``."""
    objects = {"params": cfg.params, "grid": cfg.grid, "stepper": cfg.stepper,
               "field": cfg.params.applied_field, "run": cfg}
    out = []
    for key, (_, target, attr) in _KEYS.items():
        value = getattr(objects[target], attr)
        if value is None:
            continue
        if key == "field_coeffs":
            text = ", ".join(_fmt_complex(c) for c in value)
            if not text:
                continue
        elif key == "frozen_fields":
            if not value:
                continue
            text = ", ".join(sorted(value))
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"


def config_keys() -> list[str]:
    return list(_KEYS)


def default_config(**changes) -> RunConfig:
    """The configuration used by ``check`` when none is given."""
    cfg = RunConfig(params=Params(applied_field=AppliedField.uniform(1.0, 0.5)), grid=Grid(32, 32))
    return cfg.replace(**changes) if changes else cfg

