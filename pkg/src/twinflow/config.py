"""Run configuration: strict key-value parsing, defaults, canonical dumps.

The on-disk format is INI-style sections of ``key = value`` lines.  Parsing
is strict: unknown sections or keys, duplicates, type mismatches, and
out-of-range values are all rejected with the offending key path.  The
canonical dump writes every key (defaults filled) in a fixed order, so its
hash is stable under reordering of the input.
"""

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, fields

__all__ = ["SimConfig", "ConfigError", "parse_config", "load_config",
           "dump_config", "config_hash"]


class ConfigError(ValueError):
    pass


def _positive(x):
    return x > 0


def _nonnegative(x):
    return x >= 0


def _at_least_one(x):
    return x >= 1


def _fraction(x):
    return 0.0 < x <= 1.0


# (section, key) -> (attribute, type, default_or_REQUIRED, validator, description)
_REQUIRED = object()

_SCHEMA = [
    ("system", "n_fluid", int, _REQUIRED, _nonnegative),
    ("system", "density", float, 0.8, _positive),
    ("system", "bulk", bool, False, None),
    ("system", "wall_nx", int, 8, _at_least_one),
    ("system", "wall_ny", int, 8, _at_least_one),
    ("system", "wall_layers", int, 2, _at_least_one),
    ("system", "wall_spacing", float, 1.0, _positive),
    ("system", "fluid_wall_gap", float, 1.0, _positive),
    ("forcefield", "epsilon", float, 1.0, _positive),
    ("forcefield", "sigma", float, 1.0, _positive),
    ("forcefield", "r_cut", float, 2.5, _positive),
    ("forcefield", "k_spring", float, 100.0, _nonnegative),
    ("forcefield", "mass_fluid", float, 1.0, _positive),
    ("forcefield", "mass_wall", float, 1.0, _positive),
    ("thermostat", "chain_length", int, 3, lambda x: x >= 2),
    ("thermostat", "omega", float, 2.0, _positive),
    ("run", "temperature", float, 1.0, _positive),
    ("run", "dt", float, 0.005, _positive),
    ("run", "equilibration_steps", int, 10000, _nonnegative),
    ("run", "rescale_steps", int, 4000, _nonnegative),
    ("run", "rescale_every", int, 200, _at_least_one),
    ("run", "production_steps", int, 50000, _nonnegative),
    ("run", "production_thermostat", bool, True, None),
    ("run", "twin", bool, True, None),
    ("run", "v_wall", float, 0.0, None),
    ("run", "replicas", int, 10, _at_least_one),
    ("run", "sample_interval", int, 200, _at_least_one),
    ("run", "steady_window_start", int, -1, None),
    ("run", "tau_a", float, 1.0, _positive),
    ("run", "seed", int, _REQUIRED, _nonnegative),
    ("output", "directory", str, ".", None),
    ("output", "record_particles", bool, False, None),
    ("output", "record_pressure", bool, False, None),
    ("output", "record_wall_force", bool, False, None),
    ("output", "record_momenta", bool, False, None),
    ("output", "record_interval", int, 5, _at_least_one),
]

_SECTIONS = []
for _sec, *_ in _SCHEMA:
    if _sec not in _SECTIONS:
        _SECTIONS.append(_sec)


def _field_defaults():
    out = {}
    for _, key, typ, default, _v in _SCHEMA:
        out[key] = (typ, default)
    return out


@dataclass
class SimConfig:
    n_fluid: int
    seed: int
    density: float = 0.8
    bulk: bool = False
    wall_nx: int = 8
    wall_ny: int = 8
    wall_layers: int = 2
    wall_spacing: float = 1.0
    fluid_wall_gap: float = 1.0
    epsilon: float = 1.0
    sigma: float = 1.0
    r_cut: float = 2.5
    k_spring: float = 100.0
    mass_fluid: float = 1.0
    mass_wall: float = 1.0
    chain_length: int = 3
    omega: float = 2.0
    temperature: float = 1.0
    dt: float = 0.005
    equilibration_steps: int = 10000
    rescale_steps: int = 4000
    rescale_every: int = 200
    production_steps: int = 50000
    production_thermostat: bool = True
    twin: bool = True
    v_wall: float = 0.0
    replicas: int = 10
    sample_interval: int = 200
    steady_window_start: int = -1
    tau_a: float = 1.0
    directory: str = "."
    record_particles: bool = False
    record_pressure: bool = False
    record_wall_force: bool = False
    record_momenta: bool = False
    record_interval: int = 5

    @property
    def beta(self):
        return 1.0 / self.temperature

    def window_start(self):
        """First production step inside the steady window."""
        if self.steady_window_start >= 0:
            return self.steady_window_start
        return self.production_steps // 2

    def validate(self):
        for section, key, typ, default, check in _SCHEMA:
            val = getattr(self, key)
            if check is not None and not check(val):
                raise ConfigError(f"[{section}].{key}: value {val!r} out of range")
        if self.steady_window_start >= self.production_steps:
            raise ConfigError("[run].steady_window_start: at or past the "
                              "end of production")
        if isinstance(self, SimConfig) and not self.bulk and self.n_fluid == 0 \
                and self.twin:
            # wall-only calibration runs are allowed, but not as twins
            raise ConfigError("[run].twin: requires fluid particles")
        return self


def _parse_bool(raw, path):
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{path}: expected a boolean, got {raw!r}")


def parse_config(text):
    """Parse config text into a validated :class:`SimConfig`."""
    cp = configparser.ConfigParser(strict=True, interpolation=None)
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key: {exc}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    known = {(s, k) for s, k, *_ in _SCHEMA}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if (section, key) not in known:
                raise ConfigError(f"unknown key [{section}].{key}")

    values = {}
    for section, key, typ, default, check in _SCHEMA:
        path = f"[{section}].{key}"
        if cp.has_option(section, key):
            raw = cp.get(section, key)
            try:
                if typ is bool:
                    val = _parse_bool(raw, path)
                elif typ is int:
                    val = int(raw)
                    if float(raw) != val:
                        raise ValueError
                elif typ is float:
                    val = float(raw)
                    if not math.isfinite(val):
                        raise ValueError
                else:
                    val = raw
            except ValueError:
                raise ConfigError(
                    f"{path}: expected {typ.__name__}, got {raw!r}") from None
        elif default is _REQUIRED:
            raise ConfigError(f"{path}: required key missing")
        else:
            val = default
        if check is not None and not check(val):
            raise ConfigError(f"{path}: value {val!r} out of range")
        values[key] = val
    return SimConfig(**values).validate()


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format_value(val):
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def dump_config(config):
    """Canonical text with every key present, in schema order."""
    buf = io.StringIO()
    current = None
    for section, key, *_ in _SCHEMA:
        if section != current:
            if current is not None:
                buf.write("\n")
            buf.write(f"[{section}]\n")
            current = section
        buf.write(f"{key} = {_format_value(getattr(config, key))}\n")
    return buf.getvalue()


def config_hash(config):
    """Hash of the canonical dump; insensitive to input key order."""
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()
