"""Scenario configuration: sectioned key = value text with line diagnostics.

The format is deliberately small: ``[section]`` headers, ``key = value``
lines, ``#`` comments.  Complex values are written ``a+bi`` (``j`` also
accepted), lists are comma separated.  Parsing collects every problem with
its line number instead of stopping at the first; unknown keys name the
nearest valid one.  ``emit_config`` renders a canonical text whose re-parse
is semantically identical.
"""
from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field

from .errors import ConfigError

_SECTIONS = {
    "system": ("dimension", "j_diag"),
    "flow": ("order", "f_coeffs"),
    "constants": (),          # keys alpha_<i>
    "grid": ("x_min", "x_max", "nx", "t_samples"),
    "darboux": ("kappa0", "c0", "second_lambda", "lambda_initial"),  # + mixing_<k>
    "output": ("directory", "formats"),
    "verify": ("tolerance_scale",),
}
_REQUIRED_SECTIONS = ("system", "flow", "grid")
_ALPHA_KEY = re.compile(r"^alpha_(\d+)$")
_MIXING_KEY = re.compile(r"^mixing_(\d+)$")
_BARE_IMAG = re.compile(r"(?<![\d.j])j")


def parse_complex(text: str) -> complex:
    z = text.strip().replace(" ", "").replace("i", "j")
    if not z:
        raise ValueError("empty value")
    z = _BARE_IMAG.sub("1j", z)
    return complex(z)


def format_complex(z: complex) -> str:
    z = complex(z)
    re_part = f"{z.real:.17g}"
    if z.imag == 0.0:
        return re_part
    sign = "+" if z.imag >= 0 else "-"
    return f"{re_part}{sign}{abs(z.imag):.17g}i"


def _parse_list(text: str, item):
    return tuple(item(tok) for tok in text.split(",") if tok.strip())


@dataclass(frozen=True)
class SystemConfig:
    dimension: int = 2
    j_diag: tuple = (1.0 + 0j, -1.0 + 0j)


@dataclass(frozen=True)
class FlowConfig:
    order: int = 3
    f_coeffs: tuple = (0j, 0j, 0j, 1.0 + 0j)


@dataclass(frozen=True)
class GridConfig:
    x_min: float = -10.0
    x_max: float = 10.0
    nx: int = 2001
    t_samples: tuple = (0.0, 0.05, 0.1)


@dataclass(frozen=True)
class DarbouxConfig:
    kappa0: float | None = 1.0
    c0: float = -4.0
    second_lambda: complex | None = None
    lambda_initial: tuple | None = None
    mixing: tuple = ()


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class ScenarioConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    constants: tuple = ()          # pairs (i, diagonal entries tuple)
    grid: GridConfig = field(default_factory=GridConfig)
    darboux: DarbouxConfig = field(default_factory=DarbouxConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    tolerance_scale: float = 1.0

    def generator(self):
        import numpy as np
        from .linalg import DiagonalGenerator
        return DiagonalGenerator(np.array(self.system.j_diag, dtype=complex))

    def flow_poly(self):
        import numpy as np
        from .spectral import SpectralPolynomial
        return SpectralPolynomial(np.array(self.flow.f_coeffs, dtype=complex))

    def grid_obj(self):
        from .hierarchy import Grid
        g = self.grid
        return Grid(g.x_min, g.x_max, g.nx, g.t_samples)

    def target_constants(self):
        import numpy as np
        from .hierarchy import IntegralConstants
        n = self.system.dimension
        alphas = [np.zeros((n, n), dtype=complex)
                  for _ in range(self.flow.order + 1)]
        for i, entries in self.constants:
            alphas[i] = np.diag(np.array(entries, dtype=complex))
        return IntegralConstants(tuple(alphas))

    def soliton_spec(self):
        from .solitons import SolitonSpec
        d = self.darboux
        if d.kappa0 is None:
            raise ConfigError("darboux.kappa0 is required for the soliton pipeline")
        ts = self.grid.t_samples
        window = (min(ts), max(ts))
        return SolitonSpec(self.grid_obj(), kappa0=d.kappa0, c0=d.c0,
                           t_window=window, second_lambda=d.second_lambda)

    def is_mkdv_instance(self) -> bool:
        """True when the config is the cubic-flow 2 x 2 reduction pipeline."""
        return (self.system.dimension == 2
                and self.system.j_diag == (1.0 + 0j, -1.0 + 0j)
                and self.flow.order == 3
                and self.flow.f_coeffs == (0j, 0j, 0j, 1.0 + 0j)
                and self.darboux.kappa0 is not None)


class _Collector:
    def __init__(self):
        self.entries: dict = {}
        self.lines: dict = {}
        self.diagnostics: list = []

    def error(self, lineno, message):
        self.diagnostics.append((lineno, message))

    def line_of(self, section, key, default=0):
        return self.lines.get((section, key), default)

    def take(self, section, key, convert, default, required=False):
        rec = self.entries.pop((section, key), None)
        if rec is None:
            if required:
                self.error(0, f"missing key: {section}.{key}")
            return default
        raw, lineno = rec
        self.lines[(section, key)] = lineno
        try:
            return convert(raw)
        except (ValueError, TypeError) as exc:
            self.error(lineno, f"bad value for {section}.{key}: {exc}")
            return default


def _suggest(name, candidates):
    close = difflib.get_close_matches(name, candidates, n=1)
    return f"; nearest valid: {close[0]}" if close else ""


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate scenario text, raising ConfigError with all findings."""
    col = _Collector()
    section = None
    seen_sections = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                col.error(lineno, "unterminated section header")
                continue
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                col.error(lineno, f"unknown section: {name}"
                          f"{_suggest(name, _SECTIONS.keys())}")
                section = None
                continue
            section = name
            seen_sections.add(name)
            continue
        if "=" not in line:
            col.error(lineno, "expected 'key = value'")
            continue
        if section is None:
            col.error(lineno, "key outside any section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        known = _SECTIONS[section]
        patterned = ((section == "constants" and _ALPHA_KEY.match(key))
                     or (section == "darboux" and _MIXING_KEY.match(key)))
        if key not in known and not patterned:
            candidates = list(known)
            if section == "constants":
                candidates.append("alpha_<i>")
            if section == "darboux":
                candidates.append("mixing_<k>")
            col.error(lineno, f"unknown key: {section}.{key}"
                      f"{_suggest(key, candidates)}")
            continue
        if (section, key) in col.entries:
            col.error(lineno, f"duplicate key: {section}.{key}")
            continue
        col.entries[(section, key)] = (value, lineno)

    for name in _REQUIRED_SECTIONS:
        if name not in seen_sections:
            col.error(0, f"missing section: {name}")
    if col.diagnostics:
        raise ConfigError(col.diagnostics)

    system = SystemConfig(
        dimension=col.take("system", "dimension", int, 2),
        j_diag=col.take("system", "j_diag",
                        lambda s: _parse_list(s, parse_complex), (1 + 0j, -1 + 0j)))
    flow = FlowConfig(
        order=col.take("flow", "order", int, 3),
        f_coeffs=col.take("flow", "f_coeffs",
                          lambda s: _parse_list(s, parse_complex),
                          (0j, 0j, 0j, 1 + 0j)))
    grid = GridConfig(
        x_min=col.take("grid", "x_min", float, -10.0),
        x_max=col.take("grid", "x_max", float, 10.0),
        nx=col.take("grid", "nx", int, 2001),
        t_samples=col.take("grid", "t_samples",
                           lambda s: _parse_list(s, float), (0.0, 0.05, 0.1)))

    constants = []
    for (sec, key), (value, lineno) in sorted(col.entries.items()):
        if sec != "constants":
            continue
        idx = int(_ALPHA_KEY.match(key).group(1))
        col.lines[(sec, key)] = lineno
        try:
            constants.append((idx, _parse_list(value, parse_complex)))
        except ValueError as exc:
            col.error(lineno, f"bad value for constants.{key}: {exc}")
    for (sec, key) in list(col.entries):
        if sec == "constants":
            col.entries.pop((sec, key))

    def _opt_complex(s):
        s = s.strip()
        return parse_complex(s) if s else None

    def _opt_float(s):
        s = s.strip()
        return float(s) if s else None

    mixing = []
    for (sec, key), (value, lineno) in sorted(col.entries.items()):
        if sec == "darboux" and _MIXING_KEY.match(key):
            col.lines[(sec, key)] = lineno
            try:
                mixing.append((int(_MIXING_KEY.match(key).group(1)),
                               _parse_list(value, parse_complex)))
            except ValueError as exc:
                col.error(lineno, f"bad value for darboux.{key}: {exc}")
    for idx, _ in mixing:
        col.entries.pop(("darboux", f"mixing_{idx}"), None)

    darboux = DarbouxConfig(
        kappa0=col.take("darboux", "kappa0", _opt_float, 1.0),
        c0=col.take("darboux", "c0", float, -4.0),
        second_lambda=col.take("darboux", "second_lambda", _opt_complex, None),
        lambda_initial=col.take("darboux", "lambda_initial",
                                lambda s: _parse_list(s, parse_complex) or None,
                                None),
        mixing=tuple(vec for _, vec in sorted(mixing)))
    output = OutputConfig(
        directory=col.take("output", "directory", str, "out"),
        formats=col.take("output", "formats",
                         lambda s: tuple(tok.strip().lower()
                                         for tok in s.split(",") if tok.strip()),
                         ("csv", "json")))
    tolerance_scale = col.take("verify", "tolerance_scale", float, 1.0)

    cfg = ScenarioConfig(system=system, flow=flow, constants=tuple(constants),
                         grid=grid, darboux=darboux, output=output,
                         tolerance_scale=tolerance_scale)
    _validate(cfg, col)
    if col.diagnostics:
        raise ConfigError(col.diagnostics)
    return cfg


def _validate(cfg: ScenarioConfig, col: _Collector):
    n = cfg.system.dimension
    if n < 2:
        col.error(col.line_of("system", "dimension"),
                  "system.dimension must be at least 2")
    jd = cfg.system.j_diag
    if len(jd) != n:
        col.error(col.line_of("system", "j_diag"),
                  f"j_diag needs {n} entries, got {len(jd)}")
    else:
        if any(jd[a] == jd[b] for a in range(n) for b in range(a + 1, n)):
            col.error(col.line_of("system", "j_diag"),
                      "j_diag entries must be pairwise distinct")
        if abs(sum(jd)) > 1e-12 * max(1.0, max(abs(z) for z in jd)):
            col.error(col.line_of("system", "j_diag"),
                      "j_diag must sum to zero (traceless generator)")
    if cfg.flow.order < 0:
        col.error(col.line_of("flow", "order"), "flow.order must be >= 0")
    if len(cfg.flow.f_coeffs) > cfg.flow.order + 3:
        col.error(col.line_of("flow", "f_coeffs"),
                  f"flow degree exceeds order + 2 = {cfg.flow.order + 2}")
    for i, entries in cfg.constants:
        line = col.line_of("constants", f"alpha_{i}")
        if i > cfg.flow.order:
            col.error(line, f"alpha_{i} exceeds the hierarchy order {cfg.flow.order}")
        if len(entries) != n:
            col.error(line, f"alpha_{i} needs {n} diagonal entries")
        elif abs(sum(entries)) > 1e-12 * max(1.0, max(abs(z) for z in entries)):
            col.error(line, f"alpha_{i} must be traceless")
    if cfg.grid.nx < 8:
        col.error(col.line_of("grid", "nx"), "grid.nx must be at least 8")
    if not cfg.grid.x_max > cfg.grid.x_min:
        col.error(col.line_of("grid", "x_max"), "grid.x_max must exceed x_min")
    if not cfg.grid.t_samples:
        col.error(col.line_of("grid", "t_samples"), "grid.t_samples is empty")
    if cfg.darboux.kappa0 is not None and cfg.grid.t_samples:
        if cfg.darboux.kappa0 <= 2 * max(cfg.grid.t_samples):
            col.error(col.line_of("darboux", "kappa0"),
                      "kappa0 must exceed 2t over the sample window "
                      "(spectral branch would blow up)")
    for k, vec in enumerate(cfg.darboux.mixing):
        if len(vec) != n:
            col.error(col.line_of("darboux", f"mixing_{k + 1}"),
                      f"mixing vectors need {n} entries")
    for fmt in cfg.output.formats:
        if fmt not in ("csv", "json"):
            col.error(col.line_of("output", "formats"),
                      f"unknown output format: {fmt}")
    if cfg.tolerance_scale <= 0:
        col.error(col.line_of("verify", "tolerance_scale"),
                  "tolerance_scale must be positive")


def emit_config(cfg: ScenarioConfig) -> str:
    """Canonical text rendering; parse(emit(cfg)) is semantically identical."""
    out = []
    out.append("[system]")
    out.append(f"dimension = {cfg.system.dimension}")
    out.append("j_diag = " + ", ".join(format_complex(z) for z in cfg.system.j_diag))
    out.append("")
    out.append("[flow]")
    out.append(f"order = {cfg.flow.order}")
    out.append("f_coeffs = " + ", ".join(format_complex(z) for z in cfg.flow.f_coeffs))
    out.append("")
    if cfg.constants:
        out.append("[constants]")
        for i, entries in sorted(cfg.constants):
            out.append(f"alpha_{i} = " + ", ".join(format_complex(z) for z in entries))
        out.append("")
    out.append("[grid]")
    out.append(f"x_min = {cfg.grid.x_min:.17g}")
    out.append(f"x_max = {cfg.grid.x_max:.17g}")
    out.append(f"nx = {cfg.grid.nx}")
    out.append("t_samples = " + ", ".join(f"{t:.17g}" for t in cfg.grid.t_samples))
    out.append("")
    out.append("[darboux]")
    if cfg.darboux.kappa0 is not None:
        out.append(f"kappa0 = {cfg.darboux.kappa0:.17g}")
    out.append(f"c0 = {cfg.darboux.c0:.17g}")
    if cfg.darboux.second_lambda is not None:
        out.append(f"second_lambda = {format_complex(cfg.darboux.second_lambda)}")
    if cfg.darboux.lambda_initial:
        out.append("lambda_initial = "
                   + ", ".join(format_complex(z) for z in cfg.darboux.lambda_initial))
    for k, vec in enumerate(cfg.darboux.mixing, 1):
        out.append(f"mixing_{k} = " + ", ".join(format_complex(z) for z in vec))
    out.append("")
    out.append("[output]")
    out.append(f"directory = {cfg.output.directory}")
    out.append("formats = " + ", ".join(cfg.output.formats))
    out.append("")
    out.append("[verify]")
    out.append(f"tolerance_scale = {cfg.tolerance_scale:.17g}")
    out.append("")
    return "\n".join(out)
