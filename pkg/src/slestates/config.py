"""Run configuration: flat ``key = value`` documents with dotted keys.

    # comment
    background.kind = preinflation
    background.H = 1.0
    window.eta1 = -0.3
    p.count = 200
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import background as bgm
from .exceptions import SLEError

BACKGROUNDS = ("minkowski", "power_law", "desitter", "preinflation", "tabulated")
ROUTES = ("fiducial", "commutator", "both")
SPECTRUM_ROUTES = ("auto", "fiducial", "commutator")
ALIASES = {"background": "background.kind", "m0": "background.m0"}


class ConfigError(SLEError, ValueError):
    """Malformed or invalid configuration."""

    def __init__(self, message, line: Optional[int] = None, column: Optional[int] = None,
                 field: Optional[str] = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    background_kind: str = "minkowski"
    background_m0: float = 0.0
    background_nu: float = 0.0
    background_H: float = 1.0
    background_d: int = 3
    background_gauge: str = "native"
    background_table: str = ""
    window_eta1: float = -0.3
    window_eta2: float = 0.5
    window_w: float = 0.5
    window_convention: str = "cosmological"
    grid_size: int = 512
    tol: float = 1e-12
    p_min: float = 0.01
    p_max: float = 200.0
    p_count: int = 200
    p_spacing: str = "log"
    solve_p: float = 1.0
    solve_route: str = "both"
    solve_tau0: float = math.nan
    spectrum_route: str = "auto"
    smallp_order: int = 3
    smallp_samples: int = 65
    gd_order: int = 2
    gd_samples: int = 101
    seed: int = 42
    verify_break_wronskian: bool = False

    # ------------------------------------------------------------------
    @staticmethod
    def key_of(name: str) -> str:
        head, _, rest = name.partition("_")
        if head in ("background", "window", "grid", "p", "solve", "spectrum", "smallp", "gd",
                    "verify") and rest:
            return f"{head}.{rest}"
        return name

    @classmethod
    def keys(cls):
        return {cls.key_of(f.name): f for f in fields(cls)}

    def canonical(self) -> str:
        """Canonical text form (parses back to an equal config)."""
        out = []
        for key, f in self.keys().items():
            out.append(f"{key} = {_format(getattr(self, f.name))}")
        return "\n".join(out) + "\n"

    def as_dict(self) -> dict:
        return {key: getattr(self, f.name) for key, f in self.keys().items()}

    # ------------------------------------------------------------------
    def build_background(self) -> bgm.Background:
        k = self.background_kind
        if k == "minkowski":
            bg = bgm.minkowski(self.background_m0, self.background_d)
        elif k == "power_law":
            bg = bgm.power_law(self.background_nu, self.background_H, self.background_d,
                               self.background_m0)
        elif k == "desitter":
            bg = bgm.desitter(self.background_H, self.background_d, self.background_m0)
        elif k == "preinflation":
            bg = bgm.preinflation(self.background_H)
        else:
            data = np.loadtxt(self.background_table, delimiter=",", comments="#", ndmin=2)
            gauge = "conformal" if self.background_gauge == "native" else self.background_gauge
            bg = bgm.tabulated(data[:, 0], data[:, 1], gauge=gauge, d=self.background_d,
                               m0=self.background_m0)
        if self.background_gauge not in ("native", bg.gauge) and k != "tabulated":
            bg = bg.to_gauge(self.background_gauge)
        return bg

    def build_window(self, bg: Optional[bgm.Background] = None) -> bgm.WindowFunction:
        return bgm.window_family(self.window_eta1, self.window_eta2, self.window_w,
                                 background=bg, convention=self.window_convention)

    def momenta(self) -> np.ndarray:
        from .preinflation import p_grid
        return p_grid(self.p_min, self.p_max, self.p_count, self.p_spacing)

    @property
    def scale(self) -> float:
        """Momentum unit: H for expanding built-ins, 1 otherwise."""
        return self.background_H if self.background_kind in ("power_law", "desitter",
                                                              "preinflation") else 1.0

    @property
    def tau0(self) -> Optional[float]:
        return None if math.isnan(self.solve_tau0) else self.solve_tau0


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "none" if math.isnan(v) else repr(v)
    return str(v)


def _coerce(raw: str, f, line: int, column: int):
    key = RunConfig.key_of(f.name)
    typ = f.type
    try:
        if typ == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if typ == "int":
            return int(raw)
        if typ == "float":
            if raw.lower() == "none" and key == "solve.tau0":
                return math.nan
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ}", line, column, key) from None


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Parse and validate a configuration document."""
    table = RunConfig.keys()
    values = {}
    for ln, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", ln, 1)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        key = ALIASES.get(key, key)
        col = raw_line.index("=") + 2
        if key not in table:
            raise ConfigError(f"unknown key {key!r}", ln, raw_line.find(key.split(".")[0]) + 1, key)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", ln, 1, key)
        if not val and table[key].type != "str":
            raise ConfigError(f"{key}: missing value", ln, col, key)
        values[key] = (ln, col, val)
    kwargs = {}
    for key, (ln, col, val) in values.items():
        f = table[key]
        kwargs[f.name] = _coerce(val, f, ln, col)
    for key, val in (overrides or {}).items():
        if key not in table:
            raise ConfigError(f"unknown key {key!r}", field=key)
        kwargs[table[key].name] = val
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def _fail(field: str, message: str):
    raise ConfigError(f"{field}: {message}", field=field)


def validate(cfg: RunConfig) -> RunConfig:
    """Field-level and cross-field checks; raises ConfigError naming the field."""
    for key, f in RunConfig.keys().items():
        v = getattr(cfg, f.name)
        if isinstance(v, float) and not math.isfinite(v) and key != "solve.tau0":
            _fail(key, "must be finite")
    if cfg.background_kind not in BACKGROUNDS:
        _fail("background.kind", f"must be one of {', '.join(BACKGROUNDS)}")
    if cfg.background_gauge not in ("native",) + tuple(bgm.GAUGES):
        _fail("background.gauge", "must be native, cosmological, conformal or proper")
    if cfg.background_H <= 0:
        _fail("background.H", "must be positive")
    if cfg.background_m0 < 0:
        _fail("background.m0", "must be non-negative")
    if cfg.background_d < 1:
        _fail("background.d", "must be at least 1")
    if cfg.background_kind == "tabulated" and not cfg.background_table:
        _fail("background.table", "a CSV file of (t, a) rows is required")
    if cfg.window_convention not in bgm.GAUGES:
        _fail("window.convention", "must be cosmological, conformal or proper")
    if not cfg.window_eta1 < cfg.window_eta2:
        _fail("window.eta2", "must exceed window.eta1")
    if cfg.window_w <= 0:
        _fail("window.w", "must be positive")
    if cfg.grid_size < 16:
        _fail("grid.size", "must be at least 16")
    if not 1e-14 < cfg.tol < 1e-3:
        _fail("tol", "must lie in (1e-14, 1e-3)")
    if cfg.p_min <= 0:
        _fail("p.min", "must be positive")
    if cfg.p_max < cfg.p_min:
        _fail("p.max", "must be >= p.min")
    if cfg.p_count < 1:
        _fail("p.count", "must be at least 1")
    if cfg.p_spacing not in ("log", "linear"):
        _fail("p.spacing", "must be log or linear")
    if cfg.solve_p < 0:
        _fail("solve.p", "must be non-negative")
    if cfg.solve_route not in ROUTES:
        _fail("solve.route", f"must be one of {', '.join(ROUTES)}")
    if cfg.spectrum_route not in SPECTRUM_ROUTES:
        _fail("spectrum.route", f"must be one of {', '.join(SPECTRUM_ROUTES)}")
    if not 0 <= cfg.smallp_order <= 6:
        _fail("smallp.order", "must lie in [0, 6]")
    if cfg.smallp_samples < 2:
        _fail("smallp.samples", "must be at least 2")
    if not 0 <= cfg.gd_order <= 4:
        _fail("gd.order", "must lie in [0, 4]")
    if cfg.gd_samples < 2:
        _fail("gd.samples", "must be at least 2")
    if not 0 <= cfg.seed < 2 ** 64:
        _fail("seed", "must be an unsigned 64-bit integer")
    if cfg.background_kind == "preinflation":
        H = cfg.background_H
        if cfg.window_eta2 >= 1.0 / H:
            _fail("window.eta2", f"window extends to {cfg.window_eta2}, past the bound 1/H = {1.0 / H}")
        lower = (-0.5 + 1e-3) / H
        if cfg.window_eta1 < lower:
            _fail("window.eta1", f"window starts at {cfg.window_eta1}, before the bound "
                                 f"-1/(2H) + 1e-3/H = {lower}")
    elif cfg.background_kind != "tabulated":
        try:
            bg = cfg.build_background()
            cfg.build_window(bg)
        except SLEError as exc:
            _fail("window.eta1", str(exc))
    return cfg


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return validate(replace(cfg, **changes))
