"""Run configuration: ``key = value`` sections, flag overrides, validation.

A configuration file looks like::

    [model]
    nSites = 20
    alpha = 4.1

    [superposition]
    kind = PairGroundGeometry
    level = 11

    [run]
    trajectoryCount = 1000
    tFinal = 200

Every key is optional; missing keys take the standard SSH parameter set and
the run defaults below.  Keys are matched case-insensitively.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from .dynamics import RunSettings
from .errors import ConfigError, InvalidInputError
from .model import ModelParams
from .superpos import SuperpositionKind, SuperpositionSpec

_MODEL_KEYS = ("t0", "alpha", "springK", "massM", "latticeA", "nSites", "hbar")
_SUPERPOSITION_KEYS = ("kind", "level")
_RUN_KEYS = (
    "trajectoryCount",
    "dt",
    "tFinal",
    "recordStride",
    "masterSeed",
    "workers",
    "outputPath",
    "watchedLevels",
    "populationBasis",
    "checkpoint",
)
SECTIONS = {"model": _MODEL_KEYS, "superposition": _SUPERPOSITION_KEYS, "run": _RUN_KEYS}


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    kind: SuperpositionKind = SuperpositionKind.GROUND_EXCITED
    level: int | None = None
    trajectoryCount: int = 1000
    dt: float = 0.02
    tFinal: float = 300.0
    recordStride: int = 5
    masterSeed: int = 12345
    workers: int = 1
    outputPath: str = "polarization.csv"
    watchedLevels: tuple = ()  # empty means the two superposed levels
    populationBasis: str = "instantaneous"
    checkpoint: str = ""

    @property
    def nSites(self) -> int:
        return self.params.nSites

    def superposition(self) -> SuperpositionSpec:
        return SuperpositionSpec(self.kind, self.level)

    def levels(self) -> tuple:
        if self.watchedLevels:
            return tuple(self.watchedLevels)
        return self.superposition().levels(self.params)

    def run_settings(self) -> RunSettings:
        return RunSettings(
            dt=self.dt,
            tFinal=self.tFinal,
            recordStride=self.recordStride,
            watchedLevels=self.levels(),
            populationBasis=self.populationBasis,
        )

    def validate(self) -> "RunConfig":
        checks = {
            "trajectoryCount": self.trajectoryCount >= 1,
            "dt": self.dt > 0,
            "tFinal": self.tFinal > 0 and self.tFinal >= self.dt,
            "recordStride": self.recordStride >= 1,
            "workers": self.workers >= 1,
            "masterSeed": self.masterSeed >= 0,
        }
        for key, ok in checks.items():
            if not ok:
                raise ConfigError(key, f"out of range: {getattr(self, key)!r}")
        if self.populationBasis not in ("instantaneous", "initial"):
            raise ConfigError("populationBasis", "must be 'instantaneous' or 'initial'")
        try:
            self.superposition().validate(self.params)
        except InvalidInputError as exc:
            raise ConfigError("level", str(exc)) from exc
        for lv in self.watchedLevels:
            if not 1 <= lv <= self.nSites:
                raise ConfigError("watchedLevels", f"level {lv} outside 1..{self.nSites}")
        return self


def _convert(key: str, raw: str, fields: dict):
    """Turn one raw string into the typed value of ``key``."""
    raw = raw.strip()
    try:
        if key in ("nSites", "trajectoryCount", "recordStride", "masterSeed", "workers"):
            return int(raw)
        if key == "level":
            return None if raw.lower() in ("", "none") else int(raw)
        if key == "kind":
            return SuperpositionKind(raw)
        if key == "watchedLevels":
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if key in ("outputPath", "populationBasis", "checkpoint"):
            return raw
        return float(raw)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from None


def _canonical(name: str) -> tuple[str, str]:
    """Map a possibly dotted, case-insensitive key to (section, key)."""
    if "." in name:
        sec, key = name.split(".", 1)
        candidates = SECTIONS.get(sec.lower())
        if candidates is None:
            raise ConfigError(name, "unknown section")
        sections = {sec.lower(): candidates}
    else:
        sections = SECTIONS
        key = name
    for sec, keys in sections.items():
        for k in keys:
            if k.lower() == key.lower():
                return sec, k
    raise ConfigError(name, "unknown key")


def parse_config(text: str | None = None, path=None, overrides=()) -> RunConfig:
    """Build a validated RunConfig from INI text or a file plus ``key=value`` flags.

    ``overrides`` are applied after the file, so flags win.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        if path is not None:
            with open(path) as fh:
                parser.read_file(fh)
        if text:
            parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None

    values = {}
    for sec in parser.sections():
        if sec.lower() not in SECTIONS:
            raise ConfigError(sec, "unknown section")
        for key, raw in parser.items(sec):
            _, k = _canonical(f"{sec}.{key}")
            values[k] = _convert(k, raw, values)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        name, raw = item.split("=", 1)
        _, k = _canonical(name.strip())
        values[k] = _convert(k, raw, values)
    return build_config(values)


def build_config(values: dict) -> RunConfig:
    model = {k: values.pop(k) for k in _MODEL_KEYS if k in values}
    try:
        params = ModelParams(**model)
    except InvalidInputError as exc:
        key = next((k for k in _MODEL_KEYS if k in str(exc)), "model")
        raise ConfigError(key, str(exc)) from None
    try:
        cfg = RunConfig(params=params, **values)
    except InvalidInputError as exc:
        raise ConfigError("superposition", str(exc)) from None
    return cfg.validate()


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, SuperpositionKind):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI text; ``parse_config(serialize_config(c)) == c``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    flat = dataclasses.asdict(cfg.params)
    flat.update({f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg) if f.name != "params"})
    for sec, keys in SECTIONS.items():
        parser[sec] = {k: _fmt(flat[k]) for k in keys}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
