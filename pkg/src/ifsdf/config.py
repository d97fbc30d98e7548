"""Plain-text ``key=value`` configuration covering the filter and training settings."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

from .filter import FilterConfig
from .geom import InputError
from .trainer import TrainConfig

_FILTER_KEYS = {f.name for f in fields(FilterConfig)}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}


@dataclass(frozen=True)
class RunConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def items(self):
        """All resolved settings as (key, value) pairs, filter keys first."""
        out = list(asdict(self.filter).items()) + list(asdict(self.train).items())
        return out

    def to_text(self) -> str:
        return "".join(f"{k}={format_value(v)}\n" for k, v in self.items())

    def updated(self, **overrides) -> "RunConfig":
        f_kw = {k: v for k, v in overrides.items() if k in _FILTER_KEYS}
        t_kw = {k: v for k, v in overrides.items() if k in _TRAIN_KEYS}
        unknown = set(overrides) - set(f_kw) - set(t_kw)
        if unknown:
            raise InputError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return RunConfig(replace(self.filter, **f_kw), replace(self.train, **t_kw))


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
        if isinstance(default, tuple):
            parts = [p for p in raw.replace(" ", "").split(",") if p]
            kind = type(default[0]) if default else float
            return tuple(kind(p) for p in parts)
        return raw
    except ValueError as exc:
        raise InputError(f"config key {key!r}: cannot parse value {raw!r}") from exc


def parse_pairs(lines, source: str = "<config>") -> dict:
    """Parse ``key=value`` lines (``#`` comments, blank lines ignored) into typed overrides."""
    defaults = {**asdict(FilterConfig()), **asdict(TrainConfig())}
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in defaults:
            raise InputError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, raw, defaults[key])
    return out


def load_config(path=None, base: RunConfig | None = None, **overrides) -> RunConfig:
    """Read a config file (optional) on top of ``base``, then apply keyword overrides.

    Every value is validated before returning, so a bad file fails here and
    never reaches training.
    """
    base = base or RunConfig()
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                values = parse_pairs(fh, str(path))
        except OSError as exc:
            raise InputError(f"cannot read config file {path}: {exc.strerror}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return base.updated(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(str(exc)) from exc


def read_key_values(path) -> dict:
    """Untyped ``key=value`` file (manifests, metric reports)."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#") or "=" not in line:
                continue
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_key_values(pairs, path) -> None:
    with open(path, "w") as fh:
        for k, v in pairs:
            fh.write(f"{k}={format_value(v)}\n")
