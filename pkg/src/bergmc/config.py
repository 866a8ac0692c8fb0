"""Run configuration: an INI file with one ``key = value`` per line, strictly validated."""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .geometry import PLANE, SPHERE, ChartPoint, KahlerModel
from .symbols import BUILTINS, SymbolSpec

DEFAULT_SEED = 20240607


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(";", ",").split(",") if v.strip())


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_PARSERS = {"float": float, "int": int, "str": str.strip, "floats": _floats, "ints": _ints}


def _f(kind: str, default=None, required: bool = False):
    return field(default=default, metadata=dict(kind=kind, required=required))


@dataclass(frozen=True)
class ModelSection:
    model: str = _f("str", None, True)
    hbar: float = _f("float", None)
    k: int = _f("int", None)
    metric_scale: float = _f("float", 1.0)


@dataclass(frozen=True)
class SymbolSection:
    name: str = _f("str", None, True)
    c: float = _f("float", 0.0)
    coeffs: str = _f("str", "")  # "i,j:a; ..." for poly


@dataclass(frozen=True)
class MCSection:
    t: float = _f("float", None, True)
    D: float = _f("float", None)
    D_ladder: tuple = _f("floats", None)
    n_steps: int = _f("int", 200)
    n_paths: int = _f("int", 10_000)
    seed: int = _f("int", DEFAULT_SEED)
    x: tuple = _f("floats", (0.0, 0.0))
    y: tuple = _f("floats", (0.0, 0.0))
    x_chart: int = _f("int", 0)
    y_chart: int = _f("int", 0)
    elements: str = _f("str", "all")
    n_nodes: tuple = _f("ints", (10, 20))
    kato_t: tuple = _f("floats", None)


@dataclass(frozen=True)
class OracleSection:
    N: int = _f("int", None)
    n_radial: int = _f("int", None)
    n_angular: int = _f("int", None)
    n_polar: int = _f("int", None)
    n_azimuth: int = _f("int", None)
    grid_L: float = _f("float", None)
    grid_n: int = _f("int", None)
    tol: float = _f("float", 1e-4)


@dataclass(frozen=True)
class OutputSection:
    dir: str = _f("str", "results")
    results: str = _f("str", "results.jsonl")
    report: str = _f("str", "validation_report.txt")


@dataclass(frozen=True)
class ValidateSection:
    profile: str = _f("str", "quick")


_SECTIONS = dict(model=ModelSection, symbol=SymbolSection, mc=MCSection, oracle=OracleSection,
                 output=OutputSection, validate=ValidateSection)


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection
    symbol: SymbolSection
    mc: MCSection
    oracle: OracleSection = OracleSection()
    output: OutputSection = OutputSection()
    validate: ValidateSection = ValidateSection()
    source: str | None = field(default=None, compare=False)

    # -- derived objects ------------------------------------------------------

    def kahler_model(self) -> KahlerModel:
        m = self.model
        if m.model == PLANE:
            return KahlerModel(PLANE, hbar=1.0 if m.hbar is None else m.hbar, metric_scale=m.metric_scale)
        k = 1 if m.k is None else m.k
        return KahlerModel(SPHERE, hbar=1.0 / k, k=k, metric_scale=m.metric_scale)

    def symbol_spec(self) -> SymbolSpec:
        s = self.symbol
        if s.name == "const":
            return SymbolSpec.const(s.c)
        if s.name == "poly":
            return SymbolSpec.poly(_parse_coeffs(s.coeffs)).shifted(s.c)
        base = getattr(SymbolSpec, s.name)()
        return base.shifted(s.c) if s.c else base

    def ladder(self) -> tuple[float, ...]:
        if self.mc.D_ladder:
            return self.mc.D_ladder
        return (self.mc.D,) if self.mc.D is not None else ()

    def x_point(self) -> ChartPoint:
        return ChartPoint(self.mc.x_chart, self.mc.x)

    def y_point(self) -> ChartPoint:
        return ChartPoint(self.mc.y_chart, self.mc.y)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, mc=replace(self.mc, seed=int(seed)))

    # -- serialization --------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for name in _SECTIONS:
            sec = getattr(self, name)
            cp[name] = {f.name: _fmt(getattr(sec, f.name)) for f in fields(sec) if getattr(sec, f.name) is not None}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def content(self) -> dict:
        return {name: {f.name: getattr(getattr(self, name), f.name) for f in fields(getattr(self, name))}
                for name in _SECTIONS}

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]


def _parse_coeffs(s: str) -> dict:
    out = {}
    for term in s.split(";"):
        if not term.strip():
            continue
        try:
            exps, a = term.split(":")
            i, j = _ints(exps)
            out[(i, j)] = float(a)
        except ValueError as e:
            raise ConfigError(f"[symbol] coeffs: cannot parse term {term.strip()!r} (expected 'i,j:a')") from e
    return out


def parse_config(text: str, source: str | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e
    unknown = [s for s in cp.sections() if s not in _SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    parts = {}
    for name, cls in _SECTIONS.items():
        raw = dict(cp[name]) if cp.has_section(name) else {}
        known = {f.name: f for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(f"unknown key [{name}] {key}")
        kw = {}
        for key, f in known.items():
            if key in raw:
                try:
                    kw[key] = _PARSERS[f.metadata["kind"]](raw[key])
                except ValueError as e:
                    raise ConfigError(f"[{name}] {key}: cannot parse {raw[key]!r}") from e
            elif f.metadata["required"]:
                raise ConfigError(f"missing required key [{name}] {key}")
        if name in ("model", "symbol", "mc") and not cp.has_section(name):
            raise ConfigError(f"missing section [{name}]")
        parts[name] = cls(**kw)
    cfg = RunConfig(**parts, source=source)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    m, s, mc = cfg.model, cfg.symbol, cfg.mc
    if m.model not in (PLANE, SPHERE):
        raise ConfigError(f"[model] model must be 'plane' or 'sphere', got {m.model!r}")
    if m.model == PLANE and m.k is not None:
        raise ConfigError("[model] k applies to model = sphere only")
    if m.model == SPHERE and m.hbar is not None:
        raise ConfigError("[model] hbar is set by k (hbar = 1/k) for model = sphere; remove hbar")
    if s.name not in BUILTINS:
        raise ConfigError(f"[symbol] name must be one of {BUILTINS}, got {s.name!r}")
    if s.name == "cos_theta" and m.model != SPHERE:
        raise ConfigError(f"[symbol] name = cos_theta is incompatible with [model] model = {m.model}")
    if s.name in ("abs2", "poly") and m.model != PLANE:
        raise ConfigError(f"[symbol] name = {s.name} is incompatible with [model] model = {m.model}")
    if s.name == "poly":
        _parse_coeffs(s.coeffs)
    if mc.D is not None and mc.D_ladder is not None:
        raise ConfigError("[mc] give either D or D_ladder, not both")
    if mc.t <= 0:
        raise ConfigError("[mc] t must be positive")
    if mc.n_steps < 1 or mc.n_paths < 2:
        raise ConfigError("[mc] need n_steps >= 1 and n_paths >= 2")
    lad = cfg.ladder()
    if any(d <= 0 for d in lad) or any(b <= a for a, b in zip(lad, lad[1:])):
        raise ConfigError("[mc] D values must be positive and strictly increasing")
    if len(mc.x) != 2 or len(mc.y) != 2:
        raise ConfigError("[mc] x and y take two coordinates")
    if len(mc.n_nodes) != 2:
        raise ConfigError("[mc] n_nodes takes two integers")
    if mc.elements != "all":
        try:
            if len(_ints(mc.elements)) != 2:
                raise ValueError
        except ValueError:
            raise ConfigError("[mc] elements must be 'all' or 'a, b'") from None
    if cfg.validate.profile not in ("quick", "full"):
        raise ConfigError("[validate] profile must be 'quick' or 'full'")
    try:
        cfg.kahler_model()
    except ValueError as e:
        raise ConfigError(f"[model] {e}") from e


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    return parse_config(text, source=str(p))
