"""Run configuration: line-oriented ``key = value`` sections.

Example::

    [problem]
    p = 0
    nu = heaviside:0.5:1
    u0 = sin(pi*x)

    [numerics]
    N_modes = 16

Blank lines and lines starting with ``#`` or ``;`` are ignored.  Every
section and key is optional except ``[problem]``; defaults are filled in and
the resolved configuration can be dumped to JSON and read back.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .coefficients import KERNEL_EXPONENTS
from .errors import ConfigError, SturmWaveError
from .expr import compile_spec


@dataclass(frozen=True)
class ProblemConfig:
    p: str = "zero"
    nu: str = "zero"
    u0: str = "zero"
    u1: str = "zero"
    f: str = "zero"


@dataclass(frozen=True)
class NumericsConfig:
    N_modes: int = 16
    m: int = 4096
    tol: float = 1e-10
    T_end: float = 1.0
    time_samples: int = 33
    dt_base: float = 1e-3
    fd_h: float = 1e-3


@dataclass(frozen=True)
class VWSConfig:
    k_min: int = 2
    k_max: int = 8
    kernel: str = "bump"
    kernel_b: str = "squared-bump"
    M: float = 6.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: str = "csv,json"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    vws: VWSConfig = field(default_factory=VWSConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        sections = {}
        for sec_field in fields(cls):
            raw = data.get(sec_field.name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"section [{sec_field.name}] must be a mapping")
            sections[sec_field.name] = _build_section(sec_field.name, raw, None)
        extra = set(data) - {f.name for f in fields(cls)}
        if extra:
            raise ConfigError(f"unknown section {sorted(extra)[0]!r}")
        cfg = cls(**sections)
        validate(cfg)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        return cls.from_dict(json.loads(text))

    def with_overrides(self, *, N_modes: int | None = None, ladder: tuple[int, int] | None = None,
                       directory: str | None = None) -> RunConfig:
        d = self.to_dict()
        if N_modes is not None:
            d["numerics"]["N_modes"] = N_modes
        if ladder is not None:
            d["vws"]["k_min"], d["vws"]["k_max"] = ladder
        if directory is not None:
            d["output"]["directory"] = directory
        return RunConfig.from_dict(d)


_SECTION_TYPES = {
    "problem": ProblemConfig,
    "numerics": NumericsConfig,
    "vws": VWSConfig,
    "output": OutputConfig,
}


def _convert(section: str, key: str, value, typ, line: int | None):
    try:
        if typ == "int" or typ is int:
            if isinstance(value, bool):
                raise ValueError
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value) if not isinstance(value, str) else int(value.strip())
        if typ == "float" or typ is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        return str(value).strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {value!r} as {typ}", line=line) from None


def _build_section(section: str, raw: dict, lines: dict | None):
    cls = _SECTION_TYPES[section]
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        line = lines.get(key) if lines else None
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", line=line)
        kwargs[key] = _convert(section, key, value, known[key].type, line)
    return cls(**kwargs)


def parse_config_text(text: str) -> RunConfig:
    raw: dict[str, dict] = {}
    where: dict[str, dict] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError(f"malformed section header {s!r}", line=lineno)
            section = s[1:-1].strip()
            if section not in _SECTION_TYPES:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            if section in raw:
                raise ConfigError(f"duplicate section [{section}]", line=lineno)
            raw[section] = {}
            where[section] = {}
            continue
        if "=" not in s:
            raise ConfigError(f"expected key = value, got {s!r}", line=lineno)
        if section is None:
            raise ConfigError("key outside of any section", line=lineno)
        key, value = (part.strip() for part in s.split("=", 1))
        if key in raw[section]:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", line=lineno)
        raw[section][key] = value
        where[section][key] = lineno
    if "problem" not in raw:
        raise ConfigError("missing [problem] section")
    sections = {name: _build_section(name, raw.get(name, {}), where.get(name)) for name in _SECTION_TYPES}
    cfg = RunConfig(**sections)
    validate(cfg, where)
    return cfg


def _check(cond: bool, msg: str, where: dict | None, section: str, key: str) -> None:
    if not cond:
        line = where.get(section, {}).get(key) if where else None
        raise ConfigError(f"[{section}] {key}: {msg}", line=line)


def validate(cfg: RunConfig, where: dict | None = None) -> None:
    n = cfg.numerics
    _check(1 <= n.N_modes <= 512, "must be in [1, 512]", where, "numerics", "N_modes")
    _check(n.m >= 64 * n.N_modes, f"grid needs m >= 64 * N_modes = {64 * n.N_modes}", where, "numerics", "m")
    _check(n.m <= 65536, "must be <= 65536", where, "numerics", "m")
    _check(0.0 < n.tol <= 1e-4, "must be in (0, 1e-4]", where, "numerics", "tol")
    _check(0.0 < n.T_end <= 100.0, "must be in (0, 100]", where, "numerics", "T_end")
    _check(2 <= n.time_samples <= 10001, "must be in [2, 10001]", where, "numerics", "time_samples")
    _check(0.0 < n.dt_base <= 0.1, "must be in (0, 0.1]", where, "numerics", "dt_base")
    inv_h = 1.0 / n.fd_h
    _check(0.0 < n.fd_h <= 0.1 and abs(inv_h - round(inv_h)) < 1e-9, "must be 1/integer in (0, 0.1]",
           where, "numerics", "fd_h")
    v = cfg.vws
    _check(1 <= v.k_min <= 20, "must be in [1, 20]", where, "vws", "k_min")
    _check(v.k_min <= v.k_max <= 20, "k_max must be >= k_min and <= 20", where, "vws", "k_max")
    _check(v.kernel in KERNEL_EXPONENTS, f"unknown kernel; choose from {sorted(KERNEL_EXPONENTS)}", where, "vws", "kernel")
    _check(v.kernel_b in KERNEL_EXPONENTS, f"unknown kernel; choose from {sorted(KERNEL_EXPONENTS)}", where,
           "vws", "kernel_b")
    _check(0.0 < v.M <= 20.0, "must be in (0, 20]", where, "vws", "M")
    fmts = [s.strip() for s in cfg.output.formats.split(",") if s.strip()]
    _check(bool(fmts) and all(s in ("csv", "json") for s in fmts), "formats are csv and/or json", where,
           "output", "formats")
    for key in ("p", "nu", "u0", "u1", "f"):
        text = getattr(cfg.problem, key)
        try:
            compile_spec(text)
        except SturmWaveError as exc:
            line = where.get("problem", {}).get(key) if where else None
            raise ConfigError(f"[problem] {key}: {exc}", line=line) from None


def load_config(path: str | Path) -> RunConfig:
    """Read a key = value file (or a resolved-config JSON dump)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    if path.suffix == ".json":
        try:
            return RunConfig.from_json(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return parse_config_text(text)
