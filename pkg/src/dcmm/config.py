"""Experiment configuration: flat ``key = value`` sections, one per experiment.

Example::

    [exp1]
    degree_profile = pareto(10,0.3)
    grid = 5, 5.5, 6
    replicates = 20

Unknown sections or keys raise :class:`~dcmm.errors.ConfigError`.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from dcmm.errors import ConfigError, InvalidProfile
from dcmm.profiles import DegreeProfile

DEFAULT_REPLICATES = 20
FULL_REPLICATES = 100

UNIFORM_GRID = (5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0)
PARETO_GRID = (5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0)


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(x) for x in text)
    return tuple(float(tok) for tok in str(text).split(",") if tok.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _strs(text) -> tuple[str, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(text)
    return tuple(tok.strip() for tok in str(text).split(",") if tok.strip())


# annotations are strings under postponed evaluation
_CONVERT = {"int": int, "float": float, "str": str, "bool": _bool, "floats": _floats, "strs": _strs}


@dataclass(frozen=True)
class _Base:
    def __post_init__(self):
        for f in dataclasses.fields(self):
            conv = _CONVERT.get(f.metadata.get("kind", f.type))
            value = getattr(self, f.name)
            if value is not None and conv is not None:
                try:
                    object.__setattr__(self, f.name, conv(value))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{f.name}: {exc}") from exc
        try:
            self.validate()
        except InvalidProfile as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self):
        pass


def _grid():
    return field(default=None, metadata={"kind": "floats"})


@dataclass(frozen=True)
class Exp1Config(_Base):
    """Loss versus ``||theta||`` at fixed SNR, MSL against OMS."""

    n: int = 2000
    K: int = 2
    degree_profile: str = "uniform(0.3,5)"
    grid: tuple = _grid()
    snr: float = 4.5
    replicates: int = DEFAULT_REPLICATES
    pure_frac: float = 0.15
    c: float = 0.1
    gamma: float = 0.05
    tau: float = 1.0
    oms_trim: bool = False
    methods: tuple = field(default=("MSL", "OMS"), metadata={"kind": "strs"})
    tag: str = ""

    def validate(self):
        profile = DegreeProfile.parse(self.degree_profile)
        if self.grid is None:
            object.__setattr__(self, "grid", PARETO_GRID if profile.kind == "pareto" else UNIFORM_GRID)
        if not self.tag:
            object.__setattr__(self, "tag", profile.kind)
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        for b in self.grid:
            if not 0 < self.snr / b <= 1:
                raise ConfigError(f"beta = snr/b = {self.snr / b:g} is outside (0, 1] at b = {b:g}")
        bad = set(self.methods) - {"MSL", "OMS"}
        if bad or not self.methods:
            raise ConfigError(f"methods must be a subset of MSL, OMS; got {self.methods}")


@dataclass(frozen=True)
class Exp2Config(_Base):
    """Node-wise error versus ``theta_i`` on a fixed ``(theta, Pi)``."""

    n: int = 2000
    K: int = 2
    degree_profile: str = "uniform(0.3,5)"
    norm: float = 26.0
    snr: float = 23.0
    replicates: int = DEFAULT_REPLICATES
    pure_frac: float = 0.15
    c: float = 0.1
    gamma: float = 0.05
    tau: float = 1.0
    method: str = "MSL"
    zero_noise: bool = False
    tag: str = ""

    def validate(self):
        profile = DegreeProfile.parse(self.degree_profile)
        if not self.tag:
            object.__setattr__(self, "tag", profile.kind)
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not 0 < self.snr / self.norm <= 1:
            raise ConfigError("snr / norm must lie in (0, 1]")
        if self.method not in ("MSL", "OMS"):
            raise ConfigError("method must be MSL or OMS")


@dataclass(frozen=True)
class RatesConfig(_Base):
    """Optimal-rate integral against ``err_n`` and the baseline rate against ``n``."""

    profiles: tuple = field(default=("uniform(0.3,5)", "gamma(0.25,1)", "mixture(1,1)"),
                            metadata={"kind": "strs"})
    n: int = 2000
    norm: float = 10.0
    err_min: float = 1e-3
    err_max: float = 1e-2
    points: int = 9
    n_grid: tuple = field(default=(250.0, 500.0, 1000.0, 2000.0), metadata={"kind": "floats"})
    theta_bar: float = 0.3
    K: int = 2
    beta: float = 0.5
    pure_frac: float = 0.15

    def validate(self):
        for text in self.profiles:
            DegreeProfile.parse(text)
        if not 0 < self.err_min < self.err_max or self.points < 2:
            raise ConfigError("need 0 < err_min < err_max and points >= 2")


@dataclass(frozen=True)
class LfcConfig(_Base):
    """Least-favorable ensembles over a ``c0`` sweep and several seeds."""

    n: int = 400
    K: int = 2
    degree_profile: str = "uniform(0.3,5)"
    norm: float = 10.0
    beta: float = 0.5
    c0: tuple = field(default=(0.4, 0.2, 0.1, 0.05), metadata={"kind": "floats"})
    j_target: int = 9
    variant: str = "weighted"
    seeds: int = 10
    c_check: float = 0.5
    c_n: float = 1.0
    write_members: bool = False

    def validate(self):
        DegreeProfile.parse(self.degree_profile)
        if self.seeds < 1 or not self.c0:
            raise ConfigError("need seeds >= 1 and at least one c0")


SECTIONS = {"exp1": Exp1Config, "exp2": Exp2Config, "rates": RatesConfig, "lfc": LfcConfig}


def parse_sections(text: str) -> dict[str, dict[str, str]]:
    """Raw ``key -> value`` strings per section, with keys checked against the schema."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    out = {}
    for name in parser.sections():
        cls = SECTIONS.get(name)
        if cls is None:
            raise ConfigError(f"unknown section [{name}]")
        known = {f.name for f in dataclasses.fields(cls)}
        values = dict(parser[name])
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
        out[name] = values
    return out


def parse_config(text: str) -> dict[str, _Base]:
    """Parse config text into one config object per section present."""
    return {name: SECTIONS[name](**values) for name, values in parse_sections(text).items()}


def load_config(path, section: str, **overrides):
    """Config for ``section`` from the file at ``path`` (or defaults), then ``overrides``.

    ``None`` overrides are ignored.
    """
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values = parse_sections(fh.read()).get(section, {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SECTIONS[section](**values)
