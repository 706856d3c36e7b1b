"""YAML run configuration: loading, path resolution and dataclass construction."""
from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import yaml

from .basis import AuxKind, BasisConfig
from .dynamics import TurbineParams
from .identify import IdentifyConfig
from .signals import NoiseSpec
from .twin import SuiteConfig


class ConfigError(ValueError):
    pass


def load_yaml(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def build(cls, mapping, where, convert=None):
    """Instantiate a dataclass from a mapping, naming the offending field on failure."""
    mapping = dict(mapping or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(mapping) - names)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown field (expected one of {', '.join(sorted(names))})")
    for key, fn in (convert or {}).items():
        if key in mapping:
            try:
                mapping[key] = fn(mapping[key])
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}.{key}: {exc}") from exc
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def resolve(base, value, where):
    if value is None:
        raise ConfigError(f"{where}: missing path")
    p = Path(value)
    return p if p.is_absolute() else Path(base) / p


def expand_paths(base, spec, where):
    """A list of paths or glob patterns (relative to ``base``) -> sorted existing files."""
    if isinstance(spec, (str, Path)):
        spec = [spec]
    out = []
    for item in spec or []:
        if any(ch in str(item) for ch in "*?["):
            pattern = resolve(base, item, where)
            matches = sorted(Path(pattern.anchor).glob(str(pattern.relative_to(pattern.anchor))))
        else:
            matches = [resolve(base, item, where)]
        if not matches:
            raise ConfigError(f"{where}: no file matches {item!r}")
        for m in matches:
            if not m.is_file():
                raise ConfigError(f"{where}: episode file not found: {m}")
            out.append(m)
    return out


def grid(spec, where):
    """``[start, stop, n]`` (evenly spaced) or ``{values: [...]}`` -> array."""
    if isinstance(spec, dict) and "values" in spec:
        values = np.asarray(spec["values"], dtype=float)
    elif isinstance(spec, (list, tuple)) and len(spec) == 3:
        values = np.linspace(float(spec[0]), float(spec[1]), int(spec[2]))
    else:
        raise ConfigError(f"{where}: expected [start, stop, n] or {{values: [...]}}")
    if values.size == 0:
        raise ConfigError(f"{where}: empty grid")
    return values


def turbine_params(base, spec, where="params"):
    if spec is None:
        return TurbineParams()
    if isinstance(spec, str):
        spec = load_yaml(resolve(base, spec, where))
    return build(TurbineParams, spec, where)


def basis_config(spec, aux_kind, where="basis"):
    spec = dict(spec or {})
    spec.setdefault("aux_kind", aux_kind)
    kind = AuxKind(spec["aux_kind"])
    ctor = BasisConfig.freestream if kind == AuxKind.REYNOLDS else BasisConfig.waked
    convert = {"centers": tuple, "poly_orders": tuple}
    mapping = {k: convert[k](v) if k in convert else v for k, v in spec.items()}
    names = {f.name for f in dataclasses.fields(BasisConfig)}
    unknown = sorted(set(mapping) - names)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown field")
    try:
        return ctor(**mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def identify_config(spec, where="identify"):
    return build(IdentifyConfig, spec, where)


def noise_spec(spec, where="noise"):
    return build(NoiseSpec, spec, where)


def suite_config(spec, where="scenario"):
    spec = dict(spec or {})
    convert = {
        "noise": lambda v: noise_spec(v, f"{where}.noise"),
        "rv_ranges": lambda v: tuple(tuple(float(x) for x in r) for r in v),
        "u_range": lambda v: tuple(float(x) for x in v),
        "fixed_rv": lambda v: tuple(float(x) for x in (v if isinstance(v, (list, tuple)) else [v])),
        "schedule": lambda v: tuple(tuple(float(x) for x in k) for k in v),
    }
    return build(SuiteConfig, spec, where, convert)
