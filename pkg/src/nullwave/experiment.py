"""Scenario configuration, initial-data presets and the run loop."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as nio
from .diagnostics import DecayFit, EnergyReport, energy_report, fit_growth
from .grid import GridField, PeriodicGrid, spatial_derivatives
from .nullform import MINKOWSKI, NullFormTensor, QuasiNullForm, is_null, symmetrize
from .solver import NonConvergence, SolverConfig, WaveState, evolve, picard_solve
from .transform import (
    FullyNonlinearIVP,
    QuasilinearIVP,
    transform_case_a,
    transform_case_b,
    transform_prototype,
)

log = logging.getLogger(__name__)

__all__ = [
    "SCENARIOS",
    "CSV_COLUMNS",
    "ConfigError",
    "ScenarioConfig",
    "RunSummary",
    "parse_config",
    "load_config",
    "build_ivp",
    "initial_profiles",
    "run",
    "emit_tables",
    "read_table",
]

SCENARIOS = ("linear", "prototype_null", "quasi_case_a", "quasi_case_b", "nonnull_contrast", "custom")

CSV_COLUMNS = ("t", "E1", "E2", "ghost_E", "ghost_G", "ks_ratio",
               "good_deriv_ratio", "lemma31_ratio", "picard_max_iters")

# Presets used when no quasi_path is given.
CASE_A_FORM = QuasiNullForm(np.array([0.0, 1.0, 0.5]), MINKOWSKI)
CASE_B_FORM = QuasiNullForm(np.array([1.0, 0.3, 0.2]), MINKOWSKI)
NONNULL_TENSOR = NullFormTensor.from_entries({(0, 0, 0, 0): 1.0})


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    grid_n: int = 256
    half_width: float = 20 * math.pi
    dt: float | None = None
    t_end: float = 40.0
    report_every: int = 5
    amplitude: float = 0.01
    data_width: float = 2.0
    narrow_amplitude: float = 0.0
    narrow_width: float = 0.5
    perturbation: float = 0.0
    tensor_path: str | None = None
    quasi_path: str | None = None
    picard_tol: float = 1e-10
    picard_max: int = 50
    dealias: bool = True
    fit_t_min: float = 5.0
    gamma_threshold: float = 0.1
    seed: int = 0
    output_path: str = "run.csv"

    def __post_init__(self):
        if self.dt is None:
            object.__setattr__(self, "dt", 0.4 * self.grid.h)
        self.validate()

    @property
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.grid_n, self.half_width)

    @property
    def data_support(self) -> float:
        """Radius outside which the initial Gaussians are below ``e^-16`` of their peak."""
        width = self.data_width
        if self.narrow_amplitude:
            width = max(width, self.narrow_width)
        return 4.0 * width

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.dt, self.picard_tol, self.picard_max, self.dealias)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        try:
            grid = self.grid
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.amplitude < 0:
            raise ConfigError("amplitude must be nonnegative")
        if self.report_every < 1:
            raise ConfigError("report_every must be at least 1")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.data_width <= 0 or self.narrow_width <= 0:
            raise ConfigError("data widths must be positive")
        horizon = grid.half_width - self.data_support
        if self.t_end >= horizon:
            raise ConfigError(
                f"t_end={self.t_end:g} reaches the wraparound horizon L - data_support = {horizon:g}")
        if not 0 < self.dt <= 0.5 * grid.h:
            raise ConfigError(f"dt must lie in (0, 0.5*h] = (0, {0.5 * grid.h:.6g}]")
        if self.picard_tol <= 0 or self.picard_max < 1:
            raise ConfigError("picard_tol must be positive and picard_max at least 1")
        if self.scenario == "custom" and not self.tensor_path:
            raise ConfigError("scenario=custom requires tensor_path")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


def _parse_number(text: str) -> float:
    s = text.replace(" ", "").lower()
    if s.endswith("pi"):
        head = s[:-2].rstrip("*")
        return (float(head) if head else 1.0) * math.pi
    return float(s)


def _parse_value(key: str, text: str):
    kind = _FIELD_TYPES[key]
    if "bool" in kind:
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return _parse_number(text)
    return text


def parse_config(text: str, base_dir: Path | None = None) -> ScenarioConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "scenario" not in values:
        raise ConfigError("missing required key 'scenario'")
    if base_dir is not None:
        for key in ("tensor_path", "quasi_path", "output_path"):
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(base_dir / values[key])
    try:
        return ScenarioConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def _gaussian(grid: PeriodicGrid, width: float) -> np.ndarray:
    return np.exp(-(grid.radius**2) / width**2)


def _ring(grid: PeriodicGrid, width: float) -> np.ndarray:
    # zero-mean companion profile: -(width^2 / 4) * Laplacian of the Gaussian
    s = grid.radius**2 / width**2
    return (1.0 - s) * np.exp(-s)


def initial_profiles(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Bump and zero-mean ring of amplitude ``eps``, plus the optional narrow component."""
    grid = cfg.grid
    bump = cfg.amplitude * _gaussian(grid, cfg.data_width)
    ring = cfg.amplitude * _ring(grid, cfg.data_width)
    if cfg.narrow_amplitude:
        bump = bump + cfg.narrow_amplitude * _gaussian(grid, cfg.narrow_width)
        ring = ring + cfg.narrow_amplitude * _ring(grid, cfg.narrow_width)
    if cfg.perturbation:
        rng = np.random.default_rng(cfg.seed)
        noise = rng.standard_normal(grid.shape)
        smooth = grid.ifft(grid.fft(noise) * np.exp(grid.laplacian_symbol * cfg.data_width**2))
        smooth *= _gaussian(grid, cfg.data_width * 2)
        peak = float(np.max(np.abs(smooth))) or 1.0
        bump = bump + cfg.perturbation * cfg.amplitude * smooth / peak
    return bump, ring


def _directional(f: np.ndarray, grid: PeriodicGrid, a: np.ndarray, width: float) -> np.ndarray:
    d1, d2 = spatial_derivatives(f, grid, order=1)
    return width * (a[1] * d1 + a[2] * d2) / math.hypot(a[1], a[2])


def build_ivp(cfg: ScenarioConfig) -> FullyNonlinearIVP:
    """Initial data for the configured scenario.

    ``linear`` and ``custom`` start from ``u = bump``, ``d_t u = 0``;
    ``nonnull_contrast`` uses ``u = bump``, ``d_t u = -bump``. The quasilinear scenarios take ``v0 = bump`` and
    ``v1 = ring``, except case a, which uses derivatives of those profiles
    along ``(A1, A2)`` so that every line integral vanishes.
    """
    grid = cfg.grid
    bump, ring = initial_profiles(cfg)
    zero = GridField.zeros(grid)
    s = cfg.scenario
    if s == "linear":
        return FullyNonlinearIVP(NullFormTensor.zeros(), GridField(grid, bump), zero)
    if s == "nonnull_contrast":
        return FullyNonlinearIVP(symmetrize(NONNULL_TENSOR), GridField(grid, bump), GridField(grid, -bump))
    if s == "custom":
        tensor = nio.read_tensor(cfg.tensor_path)
        return FullyNonlinearIVP(symmetrize(tensor), GridField(grid, bump), zero)
    if s == "prototype_null":
        return transform_prototype(GridField(grid, bump), GridField(grid, ring))
    form = nio.read_quasi(cfg.quasi_path) if cfg.quasi_path else None
    if s == "quasi_case_a":
        form = form or CASE_A_FORM
        if form.a[0] != 0.0 or form.a[1] == 0.0:
            raise ConfigError("quasi_case_a needs A0 = 0 and A1 != 0")
        v0 = _directional(bump, grid, form.a, cfg.data_width)
        v1 = _directional(ring, grid, form.a, cfg.data_width)
        return transform_case_a(QuasilinearIVP(form, GridField(grid, v0), GridField(grid, v1)))
    if s == "quasi_case_b":
        form = form or CASE_B_FORM
        qivp = QuasilinearIVP(form, GridField(grid, bump), GridField(grid, ring))
        return transform_case_b(qivp, qivp.v1)
    raise ConfigError(f"unknown scenario {s!r}")


@dataclass
class RunSummary:
    completed: bool
    failure_time: float | None
    fits: dict = field(default_factory=dict)
    max_ratios: dict = field(default_factory=dict)
    wall_time: float = 0.0
    reports: list = field(default_factory=list)
    warnings: tuple = ()
    failure_message: str | None = None

    def __post_init__(self):
        if self.completed == (self.failure_time is not None):
            raise ValueError("exactly one of completed / failure_time must be set")

    @property
    def exit_code(self) -> int:
        return 0 if self.completed else 2


def _observer(tensor: NullFormTensor, cfg: SolverConfig):
    def observe(snap):
        w = picard_solve(snap.state, tensor, cfg).w
        return energy_report(snap.state, w, tensor, snap.picard_iterations)
    return observe


def _fits(reports: list[EnergyReport], t_min: float) -> dict:
    out = {}
    for channel, attr in (("E1", "e1"), ("E2", "e2")):
        series = [(r.t, getattr(r, attr)) for r in reports if r.t >= max(t_min, 1.0)]
        try:
            out[channel] = fit_growth(series)
        except ValueError as exc:
            log.info("no %s fit: %s", channel, exc)
            out[channel] = None
    return out


def run(cfg: ScenarioConfig, write: bool = True) -> RunSummary:
    """Build data, evolve with diagnostics at every report, and write the tables."""
    start = time.perf_counter()
    ivp = build_ivp(cfg)
    scfg = cfg.solver_config()
    failure_time = None
    message = None
    try:
        _, reports = evolve(ivp, scfg, cfg.t_end, _observer(ivp.tensor, scfg), cfg.report_every)
    except NonConvergence as exc:
        reports = exc.log
        failure_time = exc.t
        message = str(exc)
        log.warning("run stopped: %s", exc)
    summary = RunSummary(
        completed=failure_time is None,
        failure_time=failure_time,
        fits=_fits(reports, cfg.fit_t_min),
        max_ratios={
            "ks_ratio": max((r.ks_ratio for r in reports), default=0.0),
            "good_deriv_ratio": max((r.good_deriv_ratio for r in reports), default=0.0),
            "lemma31_ratio": max((r.lemma31_ratio for r in reports), default=0.0),
        },
        reports=reports,
        warnings=ivp.warnings,
        failure_message=message,
    )
    summary.wall_time = time.perf_counter() - start
    if write and reports:
        emit_tables(reports, cfg.output_path, summary=summary, cfg=cfg)
    return summary


def _fmt(x) -> str:
    return str(x) if isinstance(x, (int, np.integer)) else repr(float(x))


def emit_tables(reports, path, summary: RunSummary | None = None, cfg: ScenarioConfig | None = None) -> tuple[Path, Path]:
    """Write the report CSV and a plain-text summary next to it."""
    if not reports:
        raise ValueError("run log is empty")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow([_fmt(x) for x in r.row()])
    summary_path = path.with_suffix(path.suffix + ".summary.txt")
    summary_path.write_text(format_summary(reports, summary, cfg))
    return path, summary_path


def format_summary(reports, summary: RunSummary | None, cfg: ScenarioConfig | None) -> str:
    lines = []
    if cfg is not None:
        lines.append(f"scenario: {cfg.scenario}")
        lines.append(f"grid: n={cfg.grid_n} L={cfg.half_width!r} dt={cfg.dt!r} t_end={cfg.t_end!r}")
        lines.append(f"amplitude: {cfg.amplitude!r} width: {cfg.data_width!r} seed: {cfg.seed}")
    if summary is not None:
        lines.append(f"completed: {summary.completed}")
        if summary.failure_time is not None:
            lines.append(f"failure_time: {summary.failure_time!r}")
            lines.append(f"failure: {summary.failure_message}")
        threshold = cfg.gamma_threshold if cfg is not None else None
        for channel, fit in summary.fits.items():
            if fit is None:
                lines.append(f"fit {channel}: unavailable")
                continue
            verdict = ""
            if threshold is not None:
                verdict = f" within_threshold({threshold!r})={abs(fit.gamma_hat) <= threshold}"
            lines.append(f"fit {channel}: gamma_hat={fit.gamma_hat!r} window={fit.t_window} "
                         f"residual={fit.residual!r}{verdict}")
        for key, val in summary.max_ratios.items():
            lines.append(f"max {key}: {val!r}")
        for w in summary.warnings:
            lines.append(f"warning: {w}")
    lines.append(f"reports: {len(reports)}")
    return "\n".join(lines) + "\n"


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        rows = []
        for row in reader:
            rec = {k: float(v) for k, v in zip(header, row)}
            rec["picard_max_iters"] = int(row[-1])
            rows.append(rec)
    return rows
