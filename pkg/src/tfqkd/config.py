"""Run configuration: INI-style file, environment overrides, command-line overrides.

Precedence is defaults < file < ``TFQKD_<SECTION>_<KEY>`` environment
variables < ``--set section.key=value`` flags. Unknown sections or keys are
errors, reported with the offending line number when they come from a file.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .core import ChannelSpec, DetectorSpec, ProtocolSpec
from .phase import DriftModel


class ConfigError(ValueError):
    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        prefix = ""
        if source is not None:
            prefix = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(prefix + message)


def _float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(x) for x in text.split(",")) if text else ()


SCHEMA: dict[str, dict[str, tuple[type | object, object]]] = {
    "channel": {"alpha": (float, 0.2)},
    "detector": {"p_dc": (float, 1e-8), "eta_det": (float, 0.30)},
    "protocol": {
        "m_slices": (int, 16),
        "duty_cycle": (float, 0.9),
        "ec_factor": (float, 1.15),
        "e_opt": (float, 0.01),
        "mu_a": (float, 0.25),
        "mu_b": (float, 0.25),
        "decoy_intensities": (_float_list, ()),
        "decoy_probability": (float, 0.0),
    },
    "drift": {
        "sigma_rate_ref": (float, 2.4),
        "length_ref": (float, 100.0),
        "scaling_exponent": (float, 0.5),
        "sample_dt": (float, 0.025),
    },
    "grid": {"start": (float, 0.0), "stop": (float, 600.0), "step": (float, 10.0)},
    "run": {"seed": (int, 0), "shards": (int, 1)},
}


@dataclass(frozen=True)
class Grid:
    start: float = 0.0
    stop: float = 600.0
    step: float = 10.0

    def points(self) -> list[float]:
        if not self.step > 0:
            raise ValueError(f"grid step must be > 0, got {self.step!r}")
        if self.stop < self.start or self.start < 0:
            raise ValueError(f"empty or negative distance grid [{self.start}, {self.stop}]")
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 9) for i in range(n)]


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    drift: DriftModel = field(default_factory=DriftModel)
    grid: Grid = field(default_factory=Grid)
    seed: int = 0
    shards: int = 1

    def to_dict(self) -> dict:
        out = {
            "channel": {"alpha": self.channel.alpha},
            "detector": asdict(self.detector),
            "protocol": asdict(self.protocol),
            "drift": asdict(self.drift),
            "grid": asdict(self.grid),
            "run": {"seed": self.seed, "shards": self.shards},
        }
        out["protocol"]["decoy_intensities"] = list(self.protocol.decoy_intensities)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        values = {(s, k): v for s, keys in data.items() for k, v in keys.items()}
        for s, k in values:
            if s not in SCHEMA or k not in SCHEMA[s]:
                raise ConfigError(f"unknown key {s}.{k}")
        return _build(values, {}, None)


def _section_lines(text: str) -> dict[tuple[str, str], int]:
    lines = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, ""), n)
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip())] = n
    return lines


def _convert(section: str, key: str, raw, source, line):
    conv = SCHEMA[section][key][0]
    if not isinstance(raw, str):
        if conv is _float_list:
            return tuple(float(x) for x in raw)
        return conv(raw)
    try:
        if conv is int:
            return int(raw.strip())
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {getattr(conv, '__name__', 'value')}", source, line) from None


def _build(values: dict, lines: dict, source: str | None) -> RunConfig:
    merged = {(s, k): default for s, keys in SCHEMA.items() for k, (_, default) in keys.items()}
    for (s, k), raw in values.items():
        merged[(s, k)] = _convert(s, k, raw, source, lines.get((s, k)))

    def section(name: str) -> dict:
        return {k: merged[(name, k)] for k in SCHEMA[name]}

    def make(name: str, factory):
        try:
            return factory(**section(name))
        except (ValueError, TypeError) as exc:
            bad = next((k for k in SCHEMA[name] if k in str(exc)), "")
            line = lines.get((name, bad)) or lines.get((name, ""))
            raise ConfigError(f"[{name}] {exc}", source if line else None, line) from None

    channel = make("channel", ChannelSpec)
    detector = make("detector", DetectorSpec)
    protocol = make("protocol", ProtocolSpec)
    drift = make("drift", DriftModel)
    grid = make("grid", Grid)
    try:
        grid.points()
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}", source if lines.get(("grid", "")) else None, lines.get(("grid", ""))) from None
    run = section("run")
    if run["seed"] < 0:
        raise ConfigError("run.seed must be >= 0", source, lines.get(("run", "seed")))
    if run["shards"] < 1:
        raise ConfigError("run.shards must be >= 1", source, lines.get(("run", "shards")))
    return RunConfig(channel, detector, protocol, drift, grid, run["seed"], run["shards"])


def parse_config(
    text: str = "",
    source: str = "<config>",
    environ: dict | None = None,
    overrides: list[str] | tuple[str, ...] = (),
) -> RunConfig:
    """Build a :class:`RunConfig` from file text plus environment and flag overrides."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], source, line) from None
    lines = _section_lines(text)

    values = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", source, lines.get((sec, "")))
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", source, lines.get((sec, key)))
            values[(sec, key)] = raw

    environ = os.environ if environ is None else environ
    for sec, keys in SCHEMA.items():
        for key in keys:
            env = f"TFQKD_{sec}_{key}".upper()
            if env in environ:
                values[(sec, key)] = environ[env]
                lines.pop((sec, key), None)

    for item in overrides:
        name, sep, raw = item.partition("=")
        sec, dot, key = name.strip().partition(".")
        if not sep or not dot or sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"bad override {item!r}; expected section.key=value with a known key")
        values[(sec, key)] = raw.strip()
        lines.pop((sec, key), None)

    return _build(values, lines, source)


def load_config(path: str | Path | None = None, environ: dict | None = None, overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", "<defaults>", environ, overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path), environ, overrides)
