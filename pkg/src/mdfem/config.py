"""INI-style run configuration with validation and a lossless round trip."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field
from typing import get_type_hints

import numpy as np

from .allocate import derive_rates
from .driver import ProblemSpec
from .randomfield import make_field


class ConfigError(ValueError):
    pass


def _const(value: float):
    def f(x):
        return np.full_like(np.asarray(x, dtype=float), value)
    return f


FUNCTIONS = {
    "one": _const(1.0),
    "sin": lambda x: np.sin(math.pi * np.asarray(x, dtype=float)),
    "pi2sin": lambda x: math.pi**2 * np.sin(math.pi * np.asarray(x, dtype=float)),
    "x": lambda x: np.asarray(x, dtype=float),
}


def resolve_function(name: str):
    """Named source/functional weight, or a numeric literal for a constant."""
    if name in FUNCTIONS:
        return FUNCTIONS[name]
    try:
        return _const(float(name))
    except ValueError:
        raise ConfigError(f"unknown function {name!r}; use {sorted(FUNCTIONS)} or a number") from None


@dataclass(frozen=True)
class FieldSection:
    family: str = "sine"
    c: float = 0.25
    sigma: float = 3.0
    b_family: str = "power"
    b_exponent: float = 3.0
    jmax: int = 256


@dataclass(frozen=True)
class PdeSection:
    f: str = "one"
    g: str = "one"
    r: int = 1
    tau: float = 2.0


@dataclass(frozen=True)
class RatesSection:
    pstar: float = 0.38
    delta_prime: float = 0.0
    constants_mode: str = "practical"
    c: str = "1"  # a number or "calibrate"


@dataclass(frozen=True)
class ExperimentSection:
    epsilons: tuple[float, ...] = (0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125)
    s_ref: int = 5
    n_ref: int = 12
    h_ref: float = 2.0**-11
    ref_method: str = "gauss-hermite"
    gh_orders: tuple[int, ...] = (14, 8, 6, 5, 4)


@dataclass(frozen=True)
class OutputSection:
    directory: str = "."


@dataclass(frozen=True)
class RunConfig:
    field: FieldSection = dc_field(default_factory=FieldSection)
    pde: PdeSection = dc_field(default_factory=PdeSection)
    rates: RatesSection = dc_field(default_factory=RatesSection)
    experiment: ExperimentSection = dc_field(default_factory=ExperimentSection)
    output: OutputSection = dc_field(default_factory=OutputSection)

    @property
    def dprime(self) -> float:
        return 1.0 + self.rates.delta_prime

    def problem(self) -> ProblemSpec:
        fs = self.field
        return ProblemSpec(
            make_field(fs.family, fs.c, fs.sigma, fs.b_family, fs.b_exponent, fs.jmax),
            resolve_function(self.pde.f),
            resolve_function(self.pde.g),
            self.pde.r,
            self.pde.tau,
            self.dprime,
            self.rates.pstar,
        )

    def validate(self) -> "RunConfig":
        try:
            self.problem()
            derive_rates(self.rates.pstar, self.pde.tau, self.dprime)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.rates.constants_mode not in ("practical", "theoretical"):
            raise ConfigError("constants_mode must be 'practical' or 'theoretical'")
        if self.rates.c != "calibrate":
            try:
                if float(self.rates.c) <= 0:
                    raise ConfigError("c must be positive")
            except ValueError:
                raise ConfigError("c must be a number or 'calibrate'") from None
        if not self.experiment.epsilons or any(e <= 0 for e in self.experiment.epsilons):
            raise ConfigError("epsilons must be a nonempty list of positive numbers")
        if self.experiment.ref_method not in ("gauss-hermite", "qmc"):
            raise ConfigError("ref_method must be 'gauss-hermite' or 'qmc'")
        return self

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for sec in fields(self):
            values = asdict(getattr(self, sec.name))
            cp[sec.name] = {k: _fmt(v) for k, v in values.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(text: str, target):
    if target is int:
        return int(text)
    if target is float:
        return float(text)
    if target == tuple[float, ...]:
        return tuple(float(t) for t in text.split(",") if t.strip())
    if target == tuple[int, ...]:
        return tuple(int(t) for t in text.split(",") if t.strip())
    return text.strip()


_SECTIONS = {
    "field": FieldSection,
    "pde": PdeSection,
    "rates": RatesSection,
    "experiment": ExperimentSection,
    "output": OutputSection,
}


def parse_config(text: str) -> RunConfig:
    """Parse INI text; unknown sections or keys are rejected."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    parts = {}
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
    for name, cls in _SECTIONS.items():
        kwargs = {}
        if name in cp:
            hints = get_type_hints(cls)
            for key, raw in cp[name].items():
                if key not in hints:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                try:
                    kwargs[key] = _convert(raw, hints[key])
                except ValueError as exc:
                    raise ConfigError(f"bad value for {name}.{key}: {raw!r}") from exc
        parts[name] = cls(**kwargs)
    return RunConfig(**parts).validate()


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
