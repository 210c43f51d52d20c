"""Flat key=value simulation configs and run manifests."""
from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .simulator import SimConfig

KEYS = (
    "cell_diameter_m",
    "ring_width_m",
    "service_area_diameter_m",
    "noise_dbw",
    "path_loss_exponent",
    "snr_threshold_db",
    "node_count",
    "realizations",
    "rho",
    "seed",
)
_INT_KEYS = {"node_count", "realizations", "seed"}


class ConfigError(ValueError):
    pass


def _number(key: str, text: str):
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: cannot read {text!r} as a number") from None
    if key in _INT_KEYS:
        if value.denominator != 1:
            raise ConfigError(f"{key}: expected an integer, got {text!r}")
        return int(value)
    return float(value)


def parse_pairs(pairs: Iterable[tuple[str, str]], source: str = "config") -> dict:
    out = {}
    for key, text in pairs:
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}; known keys are {', '.join(KEYS)}")
        if key == "ring_width_m":
            parts = [_number(key, p) for p in text.split(",")]
            if len(parts) not in (1, 3):
                raise ConfigError(f"{source}: ring_width_m takes one width or three comma-separated widths")
            out[key] = tuple(parts * 3 if len(parts) == 1 else parts)
        else:
            out[key] = _number(key, text)
    return out


def read_config_text(text: str, source: str = "config") -> dict:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    return parse_pairs(pairs, source)


def parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = item.split("=", 1)
    return key, value


def build_config(values: Mapping) -> SimConfig:
    kw = dict(values)
    if "ring_width_m" in kw:
        kw["ring_widths_m"] = kw.pop("ring_width_m")
    try:
        return SimConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None, overrides: Iterable[str] = ()) -> SimConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(read_config_text(text, str(path)))
    values.update(parse_pairs((parse_override(o) for o in overrides), "override"))
    return build_config(values)


def config_snapshot(config: SimConfig) -> dict:
    snap = dataclasses.asdict(config)
    snap["ring_widths_m"] = list(snap["ring_widths_m"])
    return snap


def config_from_snapshot(snap: Mapping) -> SimConfig:
    snap = dict(snap)
    snap["ring_widths_m"] = tuple(snap["ring_widths_m"])
    try:
        return SimConfig(**snap)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"manifest config is invalid: {exc}") from None


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclasses.dataclass
class RunManifest:
    config: dict
    seed: int
    version: str
    started: str
    finished: str
    run: dict  # sweep axis and values; everything needed to replay
    outputs: dict[str, str]  # file name -> sha256

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        try:
            data = json.loads(Path(path).read_text())
            return cls(**data)
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from None
