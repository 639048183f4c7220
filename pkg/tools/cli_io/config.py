import hashlib
import io
import logging
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from dotenv import dotenv_values

from tools.bloch_dynamics.bloch_dynamics import RelaxationParams
from tools.errors import ConfigError, DomainError
from tools.phonon_bath.phonon_bath import PhononBathParams
from tools.units.units import UNIT_TABLES, energy_to_angular_frequency, fwhm_to_sigma

logger = logging.getLogger(__name__)

QUADRATURES = ("uniform", "gauss_hermite")

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class EnsembleConfig:
    """
    Inhomogeneous broadening; n_nodes = 0 picks the quadrature's automatic size
    """

    sigma: float = float(energy_to_angular_frequency(fwhm_to_sigma(23.5)))
    delta_c: float = 0.0
    n_nodes: int = 0
    quadrature: str = "uniform"
    span_sigmas: float = 6.0


@dataclass(frozen=True)
class MediumConfig:
    density: float = 5.0e20
    length: float = 1.0
    energy_ev: float = 1.3
    polarization_factor: float = 2.0


@dataclass(frozen=True)
class PulseConfig:
    theta0: float = 2.0 * np.pi
    tau0: float = 6.373
    tau_c: float = 40.0


@dataclass(frozen=True)
class GridConfig:
    """
    Discretization: dτ = τ₀/steps_per_tau0 over [0, window], α·dζ <= alpha_dz
    (or an explicit d_zeta), and the rate table resolution and field headroom.
    """

    steps_per_tau0: int = 100
    window: float = 120.0
    alpha_dz: float = 0.05
    d_zeta: float = 0.0
    table_omega: int = 201
    table_delta: int = 201
    field_headroom: float = 2.5


@dataclass(frozen=True)
class ToggleConfig:
    phonons: bool = True
    single_qd: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "data"
    slice_stride: int = 0


@dataclass(frozen=True)
class SimConfig:
    """
    A complete, validated simulation configuration in internal units
    """

    bath: PhononBathParams = field(default_factory=PhononBathParams)
    relax: RelaxationParams = field(default_factory=RelaxationParams)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    medium: MediumConfig = field(default_factory=MediumConfig)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    grids: GridConfig = field(default_factory=GridConfig)
    toggles: ToggleConfig = field(default_factory=ToggleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


@dataclass(frozen=True)
class KeySpec:
    """
    How one dotted key is read: quantity kind (a UNIT_TABLES entry, "bool" or "str"),
    the unit written by dump_config, and a validity check on the internal value.
    """

    kind: str
    unit: str = ""
    check: Optional[Callable[[Any], bool]] = None
    requirement: str = ""


def _positive(v) -> bool:
    return v > 0


def _non_negative(v) -> bool:
    return v >= 0


KEYS: Dict[str, KeySpec] = {
    "bath.alpha_p": KeySpec("coupling", "ps^2", _non_negative, ">= 0"),
    "bath.omega_b": KeySpec("frequency", "rad/ps", _positive, "> 0"),
    "bath.temperature": KeySpec("temperature", "K", _non_negative, ">= 0"),
    "relax.gamma": KeySpec("rate", "ps^-1", _non_negative, ">= 0"),
    "relax.gamma_d": KeySpec("rate", "ps^-1", _non_negative, ">= 0"),
    "ensemble.sigma": KeySpec("frequency", "rad/ps", _positive, "> 0"),
    "ensemble.delta_c": KeySpec("frequency", "rad/ps"),
    "ensemble.n_nodes": KeySpec("count", "", lambda v: v == 0 or v >= 3, "0 (automatic) or >= 3"),
    "ensemble.quadrature": KeySpec("str", "", lambda v: v in QUADRATURES, f"one of {', '.join(QUADRATURES)}"),
    "ensemble.span_sigmas": KeySpec("ratio", "", _positive, "> 0"),
    "medium.density": KeySpec("density", "m^-3", _non_negative, ">= 0"),
    "medium.length": KeySpec("length", "mm", _non_negative, ">= 0"),
    "medium.energy_ev": KeySpec("energy_ev", "eV", _positive, "> 0"),
    "medium.polarization_factor": KeySpec("ratio", "", _positive, "> 0"),
    "pulse.theta0": KeySpec("angle", "rad", _non_negative, ">= 0"),
    "pulse.tau0": KeySpec("time", "ps", _positive, "> 0"),
    "pulse.tau_c": KeySpec("time", "ps"),
    "grids.steps_per_tau0": KeySpec("count", "", lambda v: v >= 2, ">= 2"),
    "grids.window": KeySpec("time", "ps", _positive, "> 0"),
    "grids.alpha_dz": KeySpec("ratio", "", _positive, "> 0"),
    "grids.d_zeta": KeySpec("length", "mm", _non_negative, ">= 0"),
    "grids.table_omega": KeySpec("count", "", lambda v: v >= 2, ">= 2"),
    "grids.table_delta": KeySpec("count", "", lambda v: v >= 2, ">= 2"),
    "grids.field_headroom": KeySpec("ratio", "", lambda v: v >= 1.2, ">= 1.2"),
    "toggles.phonons": KeySpec("bool"),
    "toggles.single_qd": KeySpec("bool"),
    "output.directory": KeySpec("str", "", lambda v: bool(v), "non-empty"),
    "output.slice_stride": KeySpec("count", "", _non_negative, ">= 0"),
}


def _parse_value(key: str, raw: Optional[str], spec: KeySpec) -> Any:
    """
    Convert one raw document value to the internal unit of its key
    """
    if raw is None:
        raise ConfigError("missing value", key=key)
    if spec.kind == "str":
        return raw.strip()
    if spec.kind == "bool":
        text = raw.strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}", key=key)

    match = _NUMBER.match(raw)
    if not match:
        raise ConfigError(f"expected a number with an optional unit, got {raw!r}", key=key)
    number, unit = float(match.group(1)), match.group(2)
    if not unit:
        unit = spec.unit
    table = UNIT_TABLES[spec.kind]
    if unit not in table:
        allowed = ", ".join(repr(u) for u in table)
        raise ConfigError(f"unit {unit!r} not accepted (allowed: {allowed})", key=key)
    try:
        value = table[unit](number)
    except DomainError as e:
        raise ConfigError(str(e), key=key) from e
    if spec.kind == "count":
        if value != int(value):
            raise ConfigError(f"expected an integer, got {raw!r}", key=key)
        return int(value)
    return float(value)


def _sections(config: SimConfig) -> Dict[str, Any]:
    return {f.name: getattr(config, f.name) for f in fields(config)}


def _flatten(config: SimConfig) -> Dict[str, Any]:
    flat = {}
    for key in KEYS:
        section, name = key.split(".")
        flat[key] = getattr(getattr(config, section), name)
    return flat


def _build(flat: Dict[str, Any]) -> SimConfig:
    """
    Assemble and validate a SimConfig from internal-unit values
    """
    for key, value in flat.items():
        spec = KEYS[key]
        if spec.check is not None and not spec.check(value):
            raise ConfigError(f"must be {spec.requirement}, got {value!r}", key=key)

    grouped: Dict[str, Dict[str, Any]] = {}
    for key, value in flat.items():
        section, name = key.split(".")
        grouped.setdefault(section, {})[name] = value

    defaults = SimConfig()
    parts = {}
    for section, current in _sections(defaults).items():
        try:
            parts[section] = replace(current, **grouped.get(section, {}))
        except DomainError as e:
            raise ConfigError(str(e), key=section) from e
    config = SimConfig(**parts)
    _validate_combination(config)
    return config


def _validate_combination(config: SimConfig) -> None:
    """
    Checks that involve more than one key
    """
    if config.pulse.tau_c > config.grids.window:
        raise ConfigError("pulse centre lies outside the time window", key="pulse.tau_c")
    if config.toggles.single_qd and config.medium.length > 0 and config.grids.d_zeta == 0:
        raise ConfigError("single-dot propagation needs an explicit slice length", key="grids.d_zeta")
    if config.medium.length > 0 and config.relax.gamma == 0 and config.medium.density > 0:
        logger.warning("relax.gamma = 0 gives a zero light-matter coupling; the medium is transparent")


def parse_config(text: str) -> SimConfig:
    """
    Parse a configuration document

    The document uses dotenv syntax: one `dotted.key = value [unit]` per line,
    `#` comments, optional quotes. Missing keys take their defaults.

    Args:
        text: Document text

    Returns:
        Validated SimConfig in internal units

    Raises:
        ConfigError: unknown key, unknown unit, bad value or failed validation
    """
    values = dotenv_values(stream=io.StringIO(text), interpolate=False)
    flat = _flatten(SimConfig())
    for key, raw in values.items():
        if key not in KEYS:
            raise ConfigError("unknown key", key=key)
        flat[key] = _parse_value(key, raw, KEYS[key])
    return _build(flat)


def load_config(path: str) -> SimConfig:
    """
    Read and parse a configuration file
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from e
    return parse_config(text)


def override(config: SimConfig, **values: Any) -> SimConfig:
    """
    Copy of config with dotted-key overrides in internal units, e.g. override(cfg, **{"bath.temperature": 20.0})
    """
    flat = _flatten(config)
    for key, value in values.items():
        if key not in KEYS:
            raise ConfigError("unknown key", key=key)
        flat[key] = value
    return _build(flat)


def _format_value(value: Any, spec: KeySpec) -> str:
    if spec.kind == "bool":
        return "true" if value else "false"
    if spec.kind == "str":
        escaped = str(value).replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if spec.kind == "count":
        return str(int(value))
    text = repr(float(value))
    return f"{text} {spec.unit}" if spec.unit else text


def dump_config(config: SimConfig) -> str:
    """
    Canonical document of a config: sorted keys, internal units, exact float repr

    parse_config(dump_config(cfg)) == cfg.
    """
    flat = _flatten(config)
    lines = [f"{key} = {_format_value(flat[key], KEYS[key])}" for key in sorted(flat)]
    return "\n".join(lines) + "\n"


def config_hash(config: SimConfig) -> str:
    """
    SHA-256 of the canonical document
    """
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()


def describe(config: SimConfig) -> Dict[str, Tuple[Any, str]]:
    """
    Flat (value, unit) view of a config, used for output headers and the manifest
    """
    return {key: (value, KEYS[key].unit) for key, value in _flatten(config).items()}
