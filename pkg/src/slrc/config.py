"""Sectioned ``key = value`` experiment configuration.

Every key has a default; unknown keys and out-of-range values are rejected
with the offending line or a nearest-key suggestion.
"""

from __future__ import annotations

import configparser
import dataclasses
import difflib
from dataclasses import dataclass, field

from .errors import ConfigError, SlrcError
from .esn import EsnConfig
from .ngrc import NgrcSpec
from .slwave import FilmParams, SlFeatureSpec

BACKENDS = ("esn", "slwave", "ngrc")
SOURCES = ("mackey_glass", "sinusoid", "sum_of_sinusoids", "csv")


@dataclass(frozen=True)
class ExperimentSettings:
    backend: str = "esn"
    generative_mode: str = "closed_loop"
    drive_mode: str = "delayed_replica"
    replica_lag: str = "auto"  # "auto", or samples of training tail to replay (0 = all)
    postprocess: str = "none"
    input_norm: str = "none"  # or "standardize" (training mean/std)
    train_samples: int = 0  # 0 = use train_pseudo_periods
    train_pseudo_periods: float = 6.0
    beta: float = 1e-6
    horizon: int = 500
    seed: int = 0


@dataclass(frozen=True)
class SignalConfig:
    source: str = "mackey_glass"
    n_samples: int = 50_000
    discard: int = 10_000  # leading samples dropped (transient)
    downsample: int = 10
    prefilter: bool = False
    dt: float = 0.02
    freq_hz: float = 1.0
    amplitude: float = 1.0
    phase: float = 0.0
    components: str = "1:1:0"  # freq:amp:phase, comma separated
    path: str = ""
    mg_beta: float = 0.2
    mg_gamma: float = 0.1
    mg_tau: float = 17.0
    mg_q: float = 10.0
    mg_dt: float = 0.1
    mg_history: float = 1.2


@dataclass(frozen=True)
class FeatureSettings:
    n_taps: int = 16
    tap_spacing: int = 1
    include_input: bool = True
    include_square: bool = False
    washout: int = 0

    def spec(self) -> SlFeatureSpec:
        return SlFeatureSpec(self.n_taps, self.tap_spacing, self.include_input, self.include_square)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    signal: SignalConfig = field(default_factory=SignalConfig)
    esn: EsnConfig = field(default_factory=EsnConfig)
    slwave: FilmParams = field(default_factory=FilmParams)
    features: FeatureSettings = field(default_factory=FeatureSettings)
    ngrc: NgrcSpec = field(default_factory=NgrcSpec)

    def echo(self) -> str:
        """Fully resolved configuration in the same format ``load_config`` reads."""
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            obj = getattr(self, section)
            for key in keys:
                lines.append(f"{key} = {_format(getattr(obj, key))}")
            lines.append("")
        return "\n".join(lines)

    def with_overrides(self, overrides) -> "ExperimentConfig":
        return _apply(self, [_split_override(o) for o in overrides])


# keys not user-settable: seed comes from [experiment], n_u is fixed, boundary is test-only
_HIDDEN = {"esn": {"seed", "n_u"}, "slwave": {"boundary"}}

SCHEMA = {
    name: [f.name for f in dataclasses.fields(ExperimentConfig.__dataclass_fields__[name].default_factory())
           if f.name not in _HIDDEN.get(name, ())]
    for name in ("experiment", "signal", "esn", "slwave", "features", "ngrc")
}

_CHOICES = {
    ("experiment", "backend"): BACKENDS,
    ("experiment", "generative_mode"): ("closed_loop", "feedback_free"),
    ("experiment", "drive_mode"): ("delayed_replica", "sinusoid_sum"),
    ("experiment", "postprocess"): ("none", "remove_dc"),
    ("experiment", "input_norm"): ("none", "standardize"),
    ("signal", "source"): SOURCES,
}

# (predicate, interval text) checked after parsing
_RANGES = {
    ("esn", "alpha"): (lambda v: 0 < v <= 1, "(0, 1]"),
    ("esn", "rho"): (lambda v: v > 0, "(0, inf)"),
    ("esn", "density"): (lambda v: 0 < v <= 1, "(0, 1]"),
    ("esn", "n_x"): (lambda v: v >= 1, "[1, inf)"),
    ("esn", "washout"): (lambda v: v >= 0, "[0, inf)"),
    ("experiment", "beta"): (lambda v: v >= 0, "[0, inf)"),
    ("experiment", "horizon"): (lambda v: v >= 0, "[0, inf)"),
    ("experiment", "train_samples"): (lambda v: v >= 0, "[0, inf)"),
    ("experiment", "train_pseudo_periods"): (lambda v: v > 0, "(0, inf)"),
    ("signal", "n_samples"): (lambda v: v >= 1, "[1, inf)"),
    ("signal", "discard"): (lambda v: v >= 0, "[0, inf)"),
    ("signal", "downsample"): (lambda v: v >= 1, "[1, inf)"),
    ("signal", "dt"): (lambda v: v > 0, "(0, inf)"),
    ("features", "n_taps"): (lambda v: v >= 1, "[1, inf)"),
    ("features", "tap_spacing"): (lambda v: v >= 1, "[1, inf)"),
    ("features", "washout"): (lambda v: v >= 0, "[0, inf)"),
    ("ngrc", "k_delays"): (lambda v: v >= 1, "[1, inf)"),
    ("ngrc", "poly_order"): (lambda v: v >= 1, "[1, inf)"),
    ("ngrc", "spacing"): (lambda v: v >= 1, "[1, inf)"),
    ("slwave", "n_grid"): (lambda v: v >= 64, "[64, inf)"),
}


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(section, key, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                value = True
            elif low in ("false", "no", "off", "0"):
                value = False
            else:
                raise ValueError(raw)
        elif isinstance(default, int):
            value = int(float(raw)) if float(raw).is_integer() else int(raw)
        elif isinstance(default, float):
            value = float(raw)
        else:
            value = raw
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {type(default).__name__}"
        ) from None
    choices = _CHOICES.get((section, key))
    if choices and value not in choices:
        hint = difflib.get_close_matches(str(value), choices, n=1)
        msg = f"[{section}] {key}: {value!r} is not one of {', '.join(choices)}"
        raise ConfigError(msg + (f" (did you mean {hint[0]!r}?)" if hint else ""))
    check = _RANGES.get((section, key))
    if check and not check[0](value):
        raise ConfigError(f"[{section}] {key} = {value!r} is outside the admissible range {check[1]}")
    return value


def _resolve_key(section, key):
    """Map a possibly unqualified key to ``(section, key)``."""
    if section is not None:
        if section not in SCHEMA:
            hint = difflib.get_close_matches(section, SCHEMA, n=1)
            raise ConfigError(
                f"unknown section [{section}]" + (f"; did you mean [{hint[0]}]?" if hint else "")
            )
        if key not in SCHEMA[section]:
            hint = difflib.get_close_matches(key, SCHEMA[section], n=1)
            raise ConfigError(
                f"unknown key {key!r} in [{section}]"
                + (f"; did you mean {hint[0]!r}?" if hint else "")
            )
        return section, key
    owners = [s for s, keys in SCHEMA.items() if key in keys]
    if len(owners) == 1:
        return owners[0], key
    if len(owners) > 1:
        raise ConfigError(f"key {key!r} is ambiguous; qualify it as one of "
                          + ", ".join(f"{s}.{key}" for s in owners))
    every = [k for keys in SCHEMA.values() for k in keys]
    hint = difflib.get_close_matches(key, every, n=1)
    raise ConfigError(f"unknown key {key!r}" + (f"; did you mean {hint[0]!r}?" if hint else ""))


def _split_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    key = key.strip()
    section = None
    if "." in key:
        section, key = key.split(".", 1)
    return _resolve_key(section, key), value


def _apply(config: ExperimentConfig, items) -> ExperimentConfig:
    updates = {}
    for (section, key), raw in items:
        default = getattr(getattr(config, section), key)
        updates.setdefault(section, {})[key] = _convert(section, key, raw, default)
    for section, values in updates.items():
        config = dataclasses.replace(
            config, **{section: dataclasses.replace(getattr(config, section), **values)}
        )
    validate(config)
    return config


def validate(config: ExperimentConfig):
    exp = config.experiment
    if exp.generative_mode == "closed_loop" and exp.backend != "esn":
        raise ConfigError(
            f"generative_mode = closed_loop requires backend = esn (got {exp.backend!r})"
        )
    if exp.replica_lag != "auto":
        try:
            lag = int(exp.replica_lag)
        except ValueError:
            raise ConfigError("[experiment] replica_lag must be 'auto' or an integer >= 0") from None
        if lag < 0:
            raise ConfigError("[experiment] replica_lag must be 'auto' or an integer >= 0")
    if config.signal.source == "csv" and not config.signal.path:
        raise ConfigError("[signal] source = csv requires a path")
    try:
        config.esn.validate()
        config.ngrc.validate()
        config.features.spec().validate()
        if exp.backend == "slwave":
            config.slwave.validate()
    except SlrcError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str, source="<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"{source}: parse error at line {lineno}") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: key outside any [section]") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc.message}") from None
    items = []
    for section in parser.sections():
        for key, value in parser.items(section):
            items.append((_resolve_key(section, key), value))
    return _apply(ExperimentConfig(), items)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read a config file (``None`` means all defaults) and apply ``key=value`` overrides."""
    text = ""
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    config = parse_config(text, source=str(path or "<defaults>"))
    return config.with_overrides(overrides)


def reference_page() -> str:
    """Markdown table of every key and its default."""
    defaults = ExperimentConfig()
    out = ["# Configuration reference", ""]
    for section, keys in SCHEMA.items():
        out += [f"## [{section}]", "", "| key | default | allowed |", "|---|---|---|"]
        for key in keys:
            allowed = ""
            if (section, key) in _CHOICES:
                allowed = " / ".join(_CHOICES[section, key])
            elif (section, key) in _RANGES:
                allowed = _RANGES[section, key][1]
            value = _format(getattr(getattr(defaults, section), key))
            out.append(f"| `{key}` | `{value}` | {allowed} |")
        out.append("")
    return "\n".join(out)
