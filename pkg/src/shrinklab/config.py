"""Experiment configuration: a flat INI file with typed keys.

Grammar (one ``[experiment]`` section, ``key = value`` lines)::

    subcommand = mc-run
    system     = product | bernoulli | gauss
    schedule   = loglog:C=3            # see parse_schedule
    seed       = 12345
    eps        = 0.0

The schedule can also be given as dotted keys, folded into the one-line form::

    schedule.kind    = loglog | formula | table | const
    schedule.C       = 3               # loglog only
    schedule.side    = above | below   # loglog only
    schedule.formula = 2 * loglog(m) / m
    schedule.table   = path.csv
    schedule.value   = 0.1             # const only

String values may be bare or JSON string literals. Written configs always
quote strings as JSON and write floats with ``repr``, so reading back what
was written gives the same config.

Schedule strings:

* ``loglog:C=3`` or ``loglog:C=2,side=below``: track C loglog m / m
  (``side=above`` keeps mu(B_m) at or above the threshold, ``below`` at or under it);
* ``formula:EXPR``: parameter as an expression in ``m`` (see shrinklab.formula);
* ``table:PATH``: CSV with columns m, param (header optional), m = 1, 2, ... in order;
* ``const:V``: the same parameter for every m (mostly for tests).
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .formula import compile_formula
from .schedules import Kind, TargetSchedule, loglog_schedule

SECTION = "experiment"
SYSTEM_KIND = {"product": Kind.ABSTRACT, "bernoulli": Kind.BERNOULLI, "gauss": Kind.GAUSS}


@dataclass
class ExperimentConfig:
    subcommand: str = ""
    system: str = "product"
    schedule: str = "loglog:C=3"
    seed: int = 0
    samples: int = 10000
    workers: int = 1
    out: str = ""
    n_max: int = 64
    r: int = 8
    k: int = 2
    k_max: int = 0
    m0: int = 16
    m: int = 64
    N: int = 1024
    horizon: int = 1000
    burn_in: int = 16
    eps: float = 0.0
    delta: float = 1.0
    digits: str = "1"
    target: str = "[0,1/2]"
    gaps: str = "0,1,4,9,16,25"
    method: str = "auto"
    gauss_method: str = "auto"
    cap: int = 10**7
    branch_cap: int = 10**6
    bit_budget: int = 1 << 20

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp[SECTION] = {f.name: _dump(getattr(self, f.name)) for f in fields(self)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        if SECTION not in cp:
            raise ConfigError(f"config needs an [{SECTION}] section")
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        dotted = {}
        for key, raw in cp[SECTION].items():
            if key.startswith("schedule."):
                dotted[key[len("schedule."):]] = _load(raw, str, key)
                continue
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kw[key] = _load(raw, types[key], key)
        if dotted:
            if "schedule" in kw:
                raise ConfigError("give either schedule or schedule.* keys, not both")
            kw["schedule"] = _fold_schedule(dotted)
        return cls(**kw)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            return cls.from_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def updated(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


def _dump(v) -> str:
    if isinstance(v, bool):
        raise TypeError("no boolean fields")
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _load(raw: str, typ, key: str):
    try:
        if typ in ("str", str):
            if not raw.startswith('"'):
                return raw
            v = json.loads(raw)
            if not isinstance(v, str):
                raise ValueError("not a string")
            return v
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    raise ConfigError(f"unsupported field type for {key}")


def _fold_schedule(d: dict[str, str]) -> str:
    """schedule.* keys -> the one-line ``kind:body`` form."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind is None:
        present = [k for k in ("formula", "table", "value", "C") if k in d]
        if len(present) != 1:
            raise ConfigError("schedule.kind is required unless exactly one of formula/table/value/C is given")
        kind = {"formula": "formula", "table": "table", "value": "const", "C": "loglog"}[present[0]]
    kind = kind.strip().lower()
    allowed = {"loglog": {"C", "side"}, "formula": {"formula"}, "table": {"table"}, "const": {"value"}}
    if kind not in allowed:
        raise ConfigError(f"unknown schedule.kind {kind!r}")
    extra = set(d) - allowed[kind]
    if extra:
        raise ConfigError(f"schedule.{sorted(extra)[0]} does not apply to kind {kind}")
    if kind == "loglog":
        if "C" not in d:
            raise ConfigError("schedule.kind = loglog needs schedule.C")
        return f"loglog:C={d['C']}" + (f",side={d['side']}" if "side" in d else "")
    key = next(iter(allowed[kind]))
    if key not in d:
        raise ConfigError(f"schedule.kind = {kind} needs schedule.{key}")
    return f"{kind}:{d[key]}"


# -- schedules ---------------------------------------------------------------------------

def parse_schedule(text: str, kind: Kind | str) -> TargetSchedule:
    kind = Kind(kind)
    head, _, body = text.partition(":")
    head = head.strip().lower()
    if not body:
        raise ConfigError(f"schedule {text!r} needs the form kind:value")
    if head == "loglog":
        opts = _options(body)
        if "C" not in opts:
            raise ConfigError("loglog schedule needs C=...")
        try:
            C = float(opts.pop("C"))
        except ValueError:
            raise ConfigError(f"bad C in {text!r}") from None
        side = opts.pop("side", "above")
        if opts:
            raise ConfigError(f"unknown loglog options {sorted(opts)}")
        return loglog_schedule(kind, C, side)
    if head == "formula":
        f = compile_formula(body)
        return TargetSchedule(kind, tail=f, label=text)
    if head == "const":
        try:
            v = float(body) if kind is Kind.ABSTRACT else int(body)
        except ValueError:
            raise ConfigError(f"bad constant in {text!r}") from None
        return TargetSchedule(kind, tail=lambda m: v, label=text)
    if head == "table":
        return TargetSchedule(kind, table=_read_table(body.strip(), kind), label=text)
    raise ConfigError(f"unknown schedule type {head!r}")


def _options(body: str) -> dict[str, str]:
    out = {}
    for part in body.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _read_table(path: str, kind: Kind) -> tuple:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"cannot read schedule table {path}: {exc}") from None
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    vals = []
    for i, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise ConfigError(f"{path}: row {i} needs two columns")
        try:
            m = int(row[0])
            v = float(row[1]) if kind is Kind.ABSTRACT else int(row[1])
        except ValueError:
            raise ConfigError(f"{path}: row {i} is not numeric") from None
        if m != i:
            raise ConfigError(f"{path}: expected m={i}, found {m}")
        vals.append(v)
    if not vals:
        raise ConfigError(f"{path}: empty table")
    return tuple(vals)


def schedule_for(cfg: ExperimentConfig) -> TargetSchedule:
    if cfg.system not in SYSTEM_KIND:
        raise ConfigError(f"unknown system {cfg.system!r}")
    return parse_schedule(cfg.schedule, SYSTEM_KIND[cfg.system])
