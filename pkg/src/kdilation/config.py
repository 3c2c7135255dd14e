"""Run configuration: INI-style files with ``--set key=value`` overrides.

Example::

    [system]
    id = standard_map
    K = 1.5

    [run]
    k = 1, 2
    seed = 0
    budget = 4
    n_schedule = 250, 500, 1000, 2000, 4000
    nl_schedule = 200, 1000, 5000
    m_list = 1, 2, 5, 10
    tolerance = 0.05

    [output]
    report = report.json
    cache = .kdilation-cache

Every key other than ``id`` in ``[system]`` is a system parameter.
"""

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Optional, Tuple

from .lyapunov import TheoremConfig
from .systems import make_system

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_overrides"]


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


_DEFAULTS = TheoremConfig()


@dataclass(frozen=True)
class RunConfig:
    system_id: str
    params: Dict[str, float] = field(default_factory=dict)
    k_list: Tuple[int, ...] = (1,)
    budget: int = _DEFAULTS.budget
    seed: int = _DEFAULTS.seed
    n_schedule: Tuple[int, ...] = _DEFAULTS.n_schedule
    nl_schedule: Tuple[int, ...] = _DEFAULTS.nl_schedule
    m_list: Tuple[int, ...] = _DEFAULTS.m_list
    nodes_per_axis: Optional[int] = None
    r: float = _DEFAULTS.r
    tolerance: float = _DEFAULTS.tolerance
    method: str = _DEFAULTS.method
    test_functions: int = _DEFAULTS.test_functions
    output: str = "report.json"
    cache: Optional[str] = None

    def theorem_config(self):
        return TheoremConfig(
            n_schedule=self.n_schedule,
            nl_schedule=self.nl_schedule,
            m_list=self.m_list,
            budget=self.budget,
            seed=self.seed,
            nodes_per_axis=self.nodes_per_axis,
            r=self.r,
            tolerance=self.tolerance,
            method=self.method,
            test_functions=self.test_functions,
        )

    def system(self):
        return make_system(self.system_id, **self.params)

    def echo(self):
        """Config as plain JSON-able data (paths excluded from the hash)."""
        data = asdict(self)
        for key in ("k_list", "n_schedule", "nl_schedule", "m_list"):
            data[key] = list(data[key])
        data["params"] = dict(sorted(self.params.items()))
        return data

    def hash(self):
        data = self.echo()
        data.pop("output")
        data.pop("cache")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# key -> (section, parser)
def _int_list(text):
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def _opt_int(text):
    text = str(text).strip()
    return None if text in ("", "none", "None", "default") else int(text)


def _opt_str(text):
    text = str(text).strip()
    return text or None


def _number(text):
    text = str(text).strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


_RUN_KEYS = {
    "k": ("k_list", _int_list),
    "k_list": ("k_list", _int_list),
    "budget": ("budget", int),
    "seed": ("seed", int),
    "n_schedule": ("n_schedule", _int_list),
    "nl_schedule": ("nl_schedule", _int_list),
    "m_list": ("m_list", _int_list),
    "nodes_per_axis": ("nodes_per_axis", _opt_int),
    "r": ("r", float),
    "tolerance": ("tolerance", float),
    "method": ("method", str.strip),
    "test_functions": ("test_functions", int),
}
_OUTPUT_KEYS = {
    "report": ("output", str.strip),
    "output": ("output", str.strip),
    "cache": ("cache", _opt_str),
}


def parse_overrides(items):
    """``["run.seed=3", "system.K=1.5"]`` -> ``{("run", "seed"): "3", ...}``."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, value = item.split("=", 1)
        key = key.strip()
        if "." in key:
            section, name = key.split(".", 1)
        elif key in _RUN_KEYS:
            section, name = "run", key
        elif key in _OUTPUT_KEYS:
            section, name = "output", key
        elif key == "id":
            section, name = "system", key
        else:
            raise ConfigError(key, "unknown key; qualify system parameters as system.<name>")
        out[(section.strip(), name.strip())] = value.strip()
    return out


def load_config(path=None, overrides=None):
    """Read ``path`` (optional), apply overrides, validate, return a :class:`RunConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep parameter case, e.g. K
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError("config", f"malformed file: {exc}") from None
    for (section, name), value in parse_overrides(overrides).items():
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, name, value)

    for section in parser.sections():
        if section not in ("system", "run", "output"):
            raise ConfigError(section, "unknown section (expected system, run, output)")
    if not parser.has_option("system", "id"):
        raise ConfigError("system.id", "missing system id")

    kwargs = {"system_id": parser.get("system", "id").strip()}
    params = {}
    for name, value in parser.items("system"):
        if name == "id":
            continue
        try:
            params[name] = _number(value)
        except ValueError:
            raise ConfigError(f"system.{name}", f"not a number: {value!r}") from None
    kwargs["params"] = params

    for section, table in (("run", _RUN_KEYS), ("output", _OUTPUT_KEYS)):
        if not parser.has_section(section):
            continue
        for name, value in parser.items(section):
            if name not in table:
                raise ConfigError(f"{section}.{name}", "unknown key")
            attr, convert = table[name]
            try:
                kwargs[attr] = convert(value)
            except ValueError as exc:
                raise ConfigError(f"{section}.{name}", str(exc)) from None

    config = RunConfig(**kwargs)
    _validate(config)
    return config


def _validate(config):
    try:
        system = config.system()
    except (ValueError, TypeError) as exc:
        raise ConfigError("system", str(exc)) from None
    if not config.k_list:
        raise ConfigError("run.k", "must list at least one k")
    if list(config.k_list) != sorted(set(config.k_list)):
        raise ConfigError("run.k", "must be strictly increasing")
    for k in config.k_list:
        if not 1 <= k <= system.d:
            raise ConfigError("run.k", f"k={k} outside [1, {system.d}] for {system.id}")
    try:
        config.theorem_config()
    except ValueError as exc:
        text = str(exc)
        name = text.split(" ", 1)[0].rstrip(":")
        names = {f.name for f in fields(TheoremConfig)}
        raise ConfigError(f"run.{name}" if name in names else "run", text) from None
