"""Run configuration: a sectioned key-value file with a versioned schema tag.

Example::

    [run]
    schema = rabinowitz-run/1
    command = discriminant

    [model]
    name = circle

    [isotopy]
    builtin = constant
    value = sqrt(2)

    [window]
    a = 0
    b = 5

Numbers are plain floats or ``sqrt(N)``; lists are comma separated.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import BUILTINS, MODELS

SCHEMA = "rabinowitz-run/1"
COMMANDS = ("validate", "lift-check", "constants", "discriminant", "chords", "spectrum", "growth", "oracle", "probe", "descend")

_SQRT = re.compile(r"^\s*(-?)\s*sqrt\(\s*([0-9.eE+-]+)\s*\)\s*$")


def parse_number(text, where):
    text = str(text).strip()
    m = _SQRT.match(text)
    try:
        if m:
            arg = float(m.group(2))
            if arg < 0:
                raise ValueError
            return -math.sqrt(arg) if m.group(1) else math.sqrt(arg)
        value = float(text)
    except ValueError:
        raise ConfigError(where, f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    return value


def parse_list(text, where):
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ConfigError(where, "empty list")
    return [parse_number(p, where) for p in parts]


@dataclass
class RunConfig:
    command: str
    model: str = "circle"
    model_params: dict = field(default_factory=dict)
    isotopy: str = "constant"
    isotopy_params: dict = field(default_factory=dict)
    window: tuple = (0.0, 5.0)
    tolerances: dict = field(default_factory=lambda: {"newton": 1e-10, "integrate": 1e-12, "cluster": 1e-6})
    seeds_per_unit: int = 32
    seeds_per_dim: tuple | None = None
    fibers: tuple | None = None
    m_list: tuple = ()
    growth_kind: str = "periodic"
    kappa_factor: float = 1.05
    R_factor: float = 1.05
    nodes: int = 256
    oracle_a: float | None = None
    samples: int = 1000
    seed: int = 0
    source: dict = field(default_factory=dict)

    def build_model(self):
        return MODELS[self.model](**self.model_params)

    def build_spec(self, model=None):
        model = self.build_model() if model is None else model
        try:
            return BUILTINS[self.isotopy](model, **self.isotopy_params)
        except (TypeError, ValueError, NotImplementedError) as exc:
            raise ConfigError("isotopy", str(exc)) from None


def _positive(value, where):
    if not value > 0:
        raise ConfigError(where, "must be positive")
    return value


def _int(text, where, minimum=1):
    value = parse_number(text, where)
    if value != int(value) or value < minimum:
        raise ConfigError(where, f"must be an integer >= {minimum}")
    return int(value)


_MODEL_KEYS = {"circle": {}, "flat-torus": {"dim": "int"}, "ellipsoid": {"radii": "list"}}
_ISOTOPY_KEYS = {
    "constant": {"value": "num"},
    "sinusoidal": {"offset": "num", "amplitude": "num", "k": "list", "omega": "num", "phase": "num"},
    "kinetic-energy": {"weights": "list", "scale": "num"},
}
_ISOTOPY_ARG = {"value": "c"}


def _section_params(parser, section, allowed, skip):
    out = {}
    if not parser.has_section(section):
        return out
    for key, raw in parser.items(section):
        if key in skip:
            continue
        where = f"{section}.{key}"
        if key not in allowed:
            raise ConfigError(where, "unknown key")
        kind = allowed[key]
        if kind == "int":
            out[key] = _int(raw, where, 2)
        elif kind == "list":
            out[key] = parse_list(raw, where)
        else:
            out[_ISOTOPY_ARG.get(key, key)] = parse_number(raw, where)
    return out


def load_config(path_or_text, command=None):
    """Parse a configuration file (or its text) into a :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None)
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text and "[" not in path_or_text):
        try:
            text = Path(path_or_text).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path_or_text}: {exc.strerror}") from None
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"malformed file: {exc}") from None
    if not parser.has_section("run"):
        raise ConfigError("run", "missing section")
    run = parser["run"]
    schema = run.get("schema", "").strip()
    if schema != SCHEMA:
        raise ConfigError("run.schema", f"expected {SCHEMA!r}, got {schema!r}")
    cmd = command or run.get("command", "").strip()
    if cmd not in COMMANDS:
        raise ConfigError("run.command", f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    cfg = RunConfig(command=cmd)
    cfg.source = {s: dict(parser.items(s)) for s in parser.sections()}
    if "seed" in run:
        cfg.seed = _int(run["seed"], "run.seed", 0)

    model = parser.get("model", "name", fallback="circle").strip()
    if model not in MODELS:
        raise ConfigError("model.name", f"unknown model {model!r}; expected one of {', '.join(MODELS)}")
    cfg.model = model
    cfg.model_params = _section_params(parser, "model", _MODEL_KEYS[model], {"name"})
    if "radii" in cfg.model_params and min(cfg.model_params["radii"]) <= 0:
        raise ConfigError("model.radii", "radii must be positive")

    builtin = parser.get("isotopy", "builtin", fallback="constant").strip()
    if builtin not in BUILTINS:
        raise ConfigError("isotopy.builtin", f"unknown built-in {builtin!r}; expected one of {', '.join(BUILTINS)}")
    cfg.isotopy = builtin
    cfg.isotopy_params = _section_params(parser, "isotopy", _ISOTOPY_KEYS[builtin], {"builtin"})

    if parser.has_section("window"):
        w = parser["window"]
        lo_key = "a" if "a" in w else "n"
        hi_key = "b" if "b" in w else "m"
        lo = parse_number(w.get(lo_key, "0"), f"window.{lo_key}")
        hi = parse_number(w.get(hi_key, "5"), f"window.{hi_key}")
        if not lo < hi and cmd != "oracle":
            raise ConfigError("window", f"need {lo_key} < {hi_key}")
        if lo > hi:
            raise ConfigError("window", f"need {lo_key} <= {hi_key}")
        cfg.window = (lo, hi)

    if parser.has_section("tolerances"):
        for key, raw in parser.items("tolerances"):
            if key not in cfg.tolerances:
                raise ConfigError(f"tolerances.{key}", "unknown key")
            cfg.tolerances[key] = _positive(parse_number(raw, f"tolerances.{key}"), f"tolerances.{key}")

    if parser.has_section("seeds"):
        s = parser["seeds"]
        if "per_unit" in s:
            cfg.seeds_per_unit = _int(s["per_unit"], "seeds.per_unit")
        if "per_dim" in s:
            vals = parse_list(s["per_dim"], "seeds.per_dim")
            cfg.seeds_per_dim = tuple(_int(v, "seeds.per_dim") for v in vals)
        if "samples" in s:
            cfg.samples = _int(s["samples"], "seeds.samples")

    if parser.has_section("chords"):
        c = parser["chords"]
        try:
            cfg.fibers = (tuple(parse_list(c["fiber0"], "chords.fiber0")), tuple(parse_list(c["fiber1"], "chords.fiber1")))
        except KeyError as exc:
            raise ConfigError(f"chords.{exc.args[0]}", "missing") from None

    if parser.has_section("growth"):
        g = parser["growth"]
        if "m_list" in g:
            ms = parse_list(g["m_list"], "growth.m_list")
            if len(ms) < 4 or any(b <= a for a, b in zip(ms, ms[1:])) or ms[0] <= 0:
                raise ConfigError("growth.m_list", "need at least 4 positive increasing values")
            cfg.m_list = tuple(ms)
        kind = g.get("kind", "periodic").strip()
        if kind not in ("periodic", "chords"):
            raise ConfigError("growth.kind", "expected periodic or chords")
        cfg.growth_kind = kind

    if parser.has_section("profile"):
        p = parser["profile"]
        if "kappa_factor" in p:
            cfg.kappa_factor = parse_number(p["kappa_factor"], "profile.kappa_factor")
            if cfg.kappa_factor < 1:
                raise ConfigError("profile.kappa_factor", "must be >= 1 (admissible profiles only)")
        if "r_factor" in p:
            cfg.R_factor = parse_number(p["r_factor"], "profile.R_factor")
            if cfg.R_factor < 1:
                raise ConfigError("profile.R_factor", "must be >= 1 (admissible profiles only)")
        if "nodes" in p:
            cfg.nodes = _int(p["nodes"], "profile.nodes", 16)

    if parser.has_section("oracle") and "a" in parser["oracle"]:
        cfg.oracle_a = _positive(parse_number(parser["oracle"]["a"], "oracle.a"), "oracle.a")

    if cmd == "chords" or (cmd == "growth" and cfg.growth_kind == "chords"):
        if cfg.fibers is None:
            raise ConfigError("chords", "fiber0 and fiber1 are required")
    if cmd == "growth" and not cfg.m_list:
        raise ConfigError("growth.m_list", "required for the growth command")
    if cmd == "oracle" and cfg.oracle_a is None:
        if cfg.model == "circle" and cfg.isotopy == "constant":
            cfg.oracle_a = cfg.isotopy_params.get("c", 1.0)
        else:
            raise ConfigError("oracle.a", "required unless the run uses a constant circle rotation")
    return cfg
