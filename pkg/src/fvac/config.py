"""Run configuration files.

A file holds exactly one parameter block, ``dimensionless { ... }`` or
``physical { ... }``, and optionally a ``scan { ... }`` block whose entries
are comma-separated lists.  Entries are ``key = value`` (``:`` also
accepted), one per line or separated by ``;``.  ``#`` starts a comment.

    dimensionless {
        L_tilde = 100
        M = 256
        tau = 1e-5
        lambda = 1.2
    }
    scan {
        tau = 1e-5, 1e-4
    }
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .params import DimensionlessParams, PhysicalParams, to_dimensionless

# keys shared by both blocks
RUN_KEYS = {
    "M": int,
    "t_f_tilde": float,
    "dt_tilde": float,
    "n_traj": int,
    "seed": int,
    "save_stride": int,
    "k_cut": float,
    "initial_state": str,
    "snapshots": "bool",
}

DIMENSIONLESS_KEYS = {
    "L_tilde": ("L", float),
    "rho_tilde": ("rho0", float),
    "tau": ("tau", float),
    "lambda": ("lam", float),
    "omega_tilde": ("omega", float),
    "nu_tilde": ("nu", float),
}

PHYSICAL_KEYS = {name: float for name in PhysicalParams.__dataclass_fields__}

SCAN_KEYS = {"tau": float, "nu_tilde": float, "lambda": float, "omega_tilde": float, "M": int}

DEFAULTS = {
    "M": 256,
    "t_f_tilde": 60.0,
    "dt_tilde": 7.5e-4,
    "n_traj": 1,
    "seed": 0,
    "save_stride": 200,
    "k_cut": None,
    "initial_state": "thermal",
    "snapshots": False,
}


class ConfigError(ValueError):
    pass


def valid_keys(block: str) -> list[str]:
    if block == "dimensionless":
        return list(DIMENSIONLESS_KEYS) + list(RUN_KEYS)
    if block == "physical":
        return list(PHYSICAL_KEYS) + list(RUN_KEYS)
    if block == "scan":
        return list(SCAN_KEYS)
    raise ConfigError(f"unknown block {block!r}")


def _convert(key, kind, text):
    try:
        if kind == "bool":
            low = str(text).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        return kind(text)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {text!r}") from None


_BLOCK = re.compile(r"(\w+)\s*\{([^{}]*)\}", re.S)


def parse_blocks(text: str) -> dict[str, dict[str, str]]:
    body = re.sub(r"#[^\n]*", "", text)
    blocks = {}
    for m in _BLOCK.finditer(body):
        name = m.group(1)
        if name in blocks:
            raise ConfigError(f"block {name!r} appears twice")
        entries = {}
        for raw in re.split(r"[;\n]", m.group(2)):
            line = raw.strip()
            if not line:
                continue
            parts = re.split(r"\s*[=:]\s*", line, maxsplit=1)
            if len(parts) != 2 or not parts[0]:
                raise ConfigError(f"cannot parse entry {line!r} in block {name!r}")
            entries[parts[0]] = parts[1].strip()
        blocks[name] = entries
    leftover = _BLOCK.sub("", body).strip()
    if leftover:
        raise ConfigError(f"text outside any block: {leftover.splitlines()[0]!r}")
    return blocks


@dataclass
class RunConfig:
    params: DimensionlessParams
    run: dict = field(default_factory=lambda: dict(DEFAULTS))
    scan: dict = field(default_factory=dict)
    source: str = "dimensionless"

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """Apply ``key -> text`` overrides using the same names as the file."""
        pvals = self.params.as_dict()
        run = dict(self.run)
        for key, text in overrides.items():
            if key in DIMENSIONLESS_KEYS:
                attr, kind = DIMENSIONLESS_KEYS[key]
                pvals[attr] = _convert(key, kind, text)
            elif key in RUN_KEYS:
                run[key] = _convert(key, RUN_KEYS[key], text)
            else:
                raise ConfigError(
                    f"unknown key {key!r}; valid keys: {', '.join(valid_keys('dimensionless'))}"
                )
        return RunConfig(params=_build_params(pvals), run=run, scan=dict(self.scan), source=self.source)


def _build_params(values) -> DimensionlessParams:
    try:
        return DimensionlessParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _check_keys(block, entries):
    valid = valid_keys(block)
    unknown = [k for k in entries if k not in valid]
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)} in {block} block; valid keys: {', '.join(valid)}")


def load_config(text: str) -> RunConfig:
    blocks = parse_blocks(text)
    extra = set(blocks) - {"dimensionless", "physical", "scan"}
    if extra:
        raise ConfigError(f"unknown block(s) {sorted(extra)}; expected dimensionless, physical or scan")
    kinds = [b for b in ("dimensionless", "physical") if b in blocks]
    if len(kinds) != 1:
        raise ConfigError("need exactly one of the dimensionless { } or physical { } blocks")
    kind = kinds[0]
    entries = blocks[kind]
    _check_keys(kind, entries)

    run = dict(DEFAULTS)
    for key, kt in RUN_KEYS.items():
        if key in entries:
            run[key] = _convert(key, kt, entries[key])

    if kind == "dimensionless":
        base = DimensionlessParams().as_dict()
        for key, (attr, kt) in DIMENSIONLESS_KEYS.items():
            if key in entries:
                base[attr] = _convert(key, kt, entries[key])
        params = _build_params(base)
    else:
        missing = [k for k in PHYSICAL_KEYS if k not in entries and k != "temperature_T"]
        if missing:
            raise ConfigError(f"physical block is missing {', '.join(missing)}")
        values = {k: _convert(k, float, entries[k]) for k in PHYSICAL_KEYS if k in entries}
        try:
            params, _ = to_dimensionless(PhysicalParams(**values))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    scan = {}
    if "scan" in blocks:
        _check_keys("scan", blocks["scan"])
        for key, text in blocks["scan"].items():
            items = [s.strip() for s in text.split(",") if s.strip()]
            if not items:
                raise ConfigError(f"empty scan axis {key!r}")
            scan[key] = [_convert(key, SCAN_KEYS[key], s) for s in items]
    return RunConfig(params=params, run=run, scan=scan, source=kind)


def read_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())
