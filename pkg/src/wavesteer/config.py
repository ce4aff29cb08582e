"""Declarative experiment configuration.

Experiments are described by a TOML file with sections [model], [domain],
[actuator], [nonlinearity], [memory], [impulses], [history], [target],
[solver], and [sweep]; an optional [control] section names the base
control law (zero when absent).  All quantities are dimensionless, in the
units of the model.  ``load_config`` builds the typed configuration,
``validate_config`` checks it against the standing hypotheses and returns
one message per violation.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .dynamics import (
    MEMORY_RULES,
    MemoryKernel,
    NonlinearitySpec,
    SolverConfig,
    validate_growth,
)
from .spectral import (
    ActuatorRegion,
    DomainSpec,
    SpectralBasis,
    analyze_field,
    collocation_grid,
)
from .state import HistorySegment, ImpulseEvent, ImpulseSchedule, ModalState, ModelParams


class ConfigError(ValueError):
    """A config file that cannot be turned into a valid experiment."""


@dataclass(frozen=True)
class ProfileSpec:
    """Named analytic profile with parameters (history, target, base control)."""

    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    domain: DomainSpec
    n_modes: int
    actuator: ActuatorRegion
    nonlinearity: NonlinearitySpec
    kernel: MemoryKernel
    schedule: ImpulseSchedule
    history: ProfileSpec
    target: ProfileSpec
    base_control: ProfileSpec
    solver: SolverConfig
    alphas: Tuple[float, ...]
    deltas: Tuple[float, ...]
    quadrature_nodes: int = 64


def _section(data: dict, name: str) -> dict:
    if name not in data:
        raise ConfigError(f"config is missing the [{name}] section")
    if not isinstance(data[name], dict):
        raise ConfigError(f"[{name}] must be a table")
    return data[name]


def _get(table: dict, section: str, key: str, default=None, required: bool = False):
    if key in table:
        return table[key]
    if required:
        raise ConfigError(f"[{section}] is missing the key '{key}'")
    return default


def load_config(path) -> ExperimentConfig:
    """Parse and type-check a TOML experiment file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")

    try:
        model_tbl = _section(data, "model")
        model = ModelParams(
            eta=float(_get(model_tbl, "model", "eta", required=True)),
            gamma=float(_get(model_tbl, "model", "gamma", required=True)),
            delay=float(_get(model_tbl, "model", "delay", required=True)),
            horizon=float(_get(model_tbl, "model", "horizon", required=True)),
        )
        dom_tbl = _section(data, "domain")
        domain = DomainSpec(
            length=float(_get(dom_tbl, "domain", "length", math.pi)),
            grid_points=int(_get(dom_tbl, "domain", "grid_points", 128)),
        )
        n_modes = int(_get(dom_tbl, "domain", "n_modes", required=True))

        act_tbl = _section(data, "actuator")
        actuator = ActuatorRegion(
            a=float(_get(act_tbl, "actuator", "a", required=True)),
            b=float(_get(act_tbl, "actuator", "b", required=True)),
        )

        nl_tbl = _section(data, "nonlinearity")
        f_params = dict(_get(nl_tbl, "nonlinearity", "f_params", {}))
        f_params.setdefault("a0", float(_get(nl_tbl, "nonlinearity", "a0", 0.0)))
        f_params.setdefault("b0", float(_get(nl_tbl, "nonlinearity", "b0", 0.0)))
        nonlinearity = NonlinearitySpec(
            f_id=str(_get(nl_tbl, "nonlinearity", "f", "zero")),
            f_params=f_params,
            g_id=str(_get(nl_tbl, "nonlinearity", "g", "zero")),
        )

        mem_tbl = _section(data, "memory")
        kernel = MemoryKernel(
            kind=str(_get(mem_tbl, "memory", "kind", "constant")),
            m0=float(_get(mem_tbl, "memory", "m0", 0.0)),
            kappa=float(_get(mem_tbl, "memory", "kappa", 0.0)),
        )

        imp_tbl = _section(data, "impulses")
        events = []
        for entry in _get(imp_tbl, "impulses", "events", []):
            entry = dict(entry)
            time = float(entry.pop("time"))
            kind = str(entry.pop("kind"))
            events.append(ImpulseEvent(time=time, kind=kind, params=entry))
        schedule = ImpulseSchedule(tuple(events))

        hist_tbl = _section(data, "history")
        history = ProfileSpec(
            kind=str(_get(hist_tbl, "history", "profile", required=True)),
            params={k: v for k, v in hist_tbl.items() if k != "profile"},
        )
        tgt_tbl = _section(data, "target")
        target = ProfileSpec(
            kind=str(_get(tgt_tbl, "target", "profile", required=True)),
            params={k: v for k, v in tgt_tbl.items() if k != "profile"},
        )
        ctl_tbl = data.get("control", {"profile": "zero"})
        base_control = ProfileSpec(
            kind=str(ctl_tbl.get("profile", "zero")),
            params={k: v for k, v in ctl_tbl.items() if k != "profile"},
        )

        sol_tbl = _section(data, "solver")
        solver = SolverConfig(
            dt=float(_get(sol_tbl, "solver", "dt", required=True)),
            scheme=str(_get(sol_tbl, "solver", "scheme", "exponential-heun")),
            memory_rule=str(_get(sol_tbl, "solver", "memory_rule", "trapezoid")),
        )
        quadrature_nodes = int(_get(sol_tbl, "solver", "quadrature_nodes", 64))

        sweep_tbl = _section(data, "sweep")
        alphas = tuple(float(a) for a in _get(sweep_tbl, "sweep", "alphas", required=True))
        deltas = tuple(float(d) for d in _get(sweep_tbl, "sweep", "deltas", required=True))
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config file {path}: {exc}")

    return ExperimentConfig(
        model=model,
        domain=domain,
        n_modes=n_modes,
        actuator=actuator,
        nonlinearity=nonlinearity,
        kernel=kernel,
        schedule=schedule,
        history=history,
        target=target,
        base_control=base_control,
        solver=solver,
        alphas=alphas,
        deltas=deltas,
        quadrature_nodes=quadrature_nodes,
    )


def with_sweep(cfg: ExperimentConfig, alphas, deltas) -> ExperimentConfig:
    """Copy of the config with the sweep lists replaced (CLI single-run path)."""
    return replace(cfg, alphas=tuple(alphas), deltas=tuple(deltas))


HISTORY_KINDS = ("zero", "single_mode", "constant", "bump", "csv")
TARGET_KINDS = ("zero", "single_mode", "constant", "bump")
CONTROL_KINDS = ("zero", "constant_mode", "sine_mode")


def _profile_state(
    profile: ProfileSpec, basis: SpectralBasis, domain: DomainSpec, what: str
) -> ModalState:
    """Modal state for a named spatial profile."""
    n = basis.n_modes
    if profile.kind == "zero":
        return ModalState.zero(n)
    if profile.kind == "single_mode":
        mode = int(profile.params.get("mode", 1))
        if not 1 <= mode <= n:
            raise ConfigError(f"{what}: mode {mode} outside 1..{n}")
        w = np.zeros(n)
        v = np.zeros(n)
        w[mode - 1] = float(profile.params.get("position", 0.0))
        v[mode - 1] = float(profile.params.get("velocity", 0.0))
        return ModalState(w, v)
    if profile.kind == "constant":
        grid = collocation_grid(domain)
        w_level = float(profile.params.get("position", 0.0))
        v_level = float(profile.params.get("velocity", 0.0))
        w = analyze_field(basis, domain, np.full_like(grid, w_level))
        v = analyze_field(basis, domain, np.full_like(grid, v_level))
        return ModalState(w, v)
    if profile.kind == "bump":
        a = float(profile.params.get("a", 0.0))
        b = float(profile.params.get("b", domain.length))
        if not 0.0 <= a < b <= domain.length:
            raise ConfigError(f"{what}: bump support [{a}, {b}] outside [0, {domain.length}]")
        grid = collocation_grid(domain)
        shape = np.where(
            (grid > a) & (grid < b),
            0.5 * (1.0 - np.cos(2.0 * np.pi * (grid - a) / (b - a))),
            0.0,
        )
        coeffs = analyze_field(basis, domain, shape)
        w_amp = float(profile.params.get("position", 0.0))
        v_amp = float(profile.params.get("velocity", 0.0))
        return ModalState(w_amp * coeffs, v_amp * coeffs)
    raise ConfigError(f"{what}: unknown profile '{profile.kind}'")


def build_history(
    cfg: ExperimentConfig, basis: SpectralBasis
) -> HistorySegment:
    """History segment on [-r, 0] from the configured profile.

    Analytic profiles are constant in time; a csv profile supplies one row
    per grid time from -r to 0 with columns w_1..w_N,v_1..v_N.
    """
    if cfg.history.kind == "csv":
        path = Path(cfg.history.params["path"])
        if not path.exists():
            raise ConfigError(f"history csv not found: {path}")
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = basis.n_modes
        expected = round(cfg.model.delay / cfg.solver.dt) + 1
        if rows.shape != (expected, 2 * n):
            raise ConfigError(
                f"history csv must be {expected} rows x {2 * n} columns, got {rows.shape}"
            )
        return HistorySegment(dt=cfg.solver.dt, w=rows[:, :n].copy(), v=rows[:, n:].copy())
    state = _profile_state(cfg.history, basis, cfg.domain, "history")
    return HistorySegment.constant(state, cfg.model.delay, cfg.solver.dt)


def build_target(cfg: ExperimentConfig, basis: SpectralBasis) -> ModalState:
    return _profile_state(cfg.target, basis, cfg.domain, "target")


def build_base_control(
    cfg: ExperimentConfig, basis: SpectralBasis
) -> Optional[Callable[[float], np.ndarray]]:
    """Base control law u(t) on [0, tau - delta]; None means identically zero."""
    profile = cfg.base_control
    n = basis.n_modes
    if profile.kind == "zero":
        return None
    mode = int(profile.params.get("mode", 1))
    if not 1 <= mode <= n:
        raise ConfigError(f"control: mode {mode} outside 1..{n}")
    amplitude = float(profile.params.get("amplitude", 0.0))
    unit = np.zeros(n)
    unit[mode - 1] = 1.0
    if profile.kind == "constant_mode":
        return lambda t: amplitude * unit
    if profile.kind == "sine_mode":
        freq = float(profile.params.get("frequency", 1.0))
        return lambda t: amplitude * math.sin(freq * t) * unit
    raise ConfigError(f"control: unknown profile '{profile.kind}'")


def _divides(dt: float, span: float) -> bool:
    k = round(span / dt)
    return k >= 1 and abs(k * dt - span) <= 1e-9 * max(1.0, abs(span))


def validate_config(cfg: ExperimentConfig) -> List[str]:
    """Check the standing hypotheses; one message per violated hypothesis."""
    violations = []
    model, solver = cfg.model, cfg.solver

    if cfg.n_modes < 1:
        violations.append(f"basis size must be >= 1 mode, got {cfg.n_modes}")
    if cfg.domain.grid_points < 4 * cfg.n_modes:
        violations.append(
            f"collocation grid too coarse for pseudo-spectral evaluation: "
            f"grid_points={cfg.domain.grid_points} < 4*n_modes={4 * cfg.n_modes}"
        )
    try:
        cfg.actuator.validate_in(cfg.domain)
    except ValueError as exc:
        violations.append(f"actuator region: {exc}")

    if not _divides(solver.dt, model.delay):
        violations.append(
            f"dt={solver.dt} must divide the delay r={model.delay} exactly "
            f"(delayed lookups must be grid hits)"
        )
    if not _divides(solver.dt, model.horizon):
        violations.append(f"dt={solver.dt} must divide the horizon tau={model.horizon} exactly")
    for t_k in cfg.schedule.times:
        if not 0 < t_k < model.horizon:
            violations.append(f"impulse time {t_k} must lie strictly inside (0, tau)")
        elif not _divides(solver.dt, t_k):
            violations.append(f"dt={solver.dt} must divide impulse time {t_k} exactly")
    for event in cfg.schedule.events:
        if event.kind not in ("constant_kick", "proportional_v"):
            violations.append(f"unknown impulse map '{event.kind}' at t={event.time}")

    t_p = cfg.schedule.last_time
    limit = min(model.horizon - t_p, model.delay)
    if not cfg.deltas:
        violations.append("sweep needs at least one window width delta")
    for delta in cfg.deltas:
        if not 0 < delta < limit:
            violations.append(
                f"window width delta={delta} violates 0 < delta < "
                f"min(tau - t_p, r) = {limit} (no impulse inside the window, "
                f"delayed arguments frozen)"
            )
        elif not _divides(solver.dt, delta):
            violations.append(f"dt={solver.dt} must divide delta={delta} exactly")
    if not cfg.alphas:
        violations.append("sweep needs at least one regularization alpha")
    for alpha in cfg.alphas:
        if alpha <= 0:
            violations.append(f"regularization alpha={alpha} must be positive")

    if cfg.quadrature_nodes < 2:
        violations.append(f"quadrature_nodes={cfg.quadrature_nodes} must be >= 2")

    growth = validate_growth(cfg.nonlinearity)
    for message in growth:
        violations.append(
            f"forcing '{cfg.nonlinearity.f_id}' breaks its declared affine "
            f"growth bound: {message}"
        )

    if not math.isfinite(cfg.kernel.bound):
        violations.append("memory kernel must have a finite essential bound")
    if solver.memory_rule not in MEMORY_RULES:
        violations.append(f"unknown memory rule '{solver.memory_rule}'")

    if cfg.history.kind not in HISTORY_KINDS:
        violations.append(f"unknown history profile '{cfg.history.kind}'")
    if cfg.target.kind not in TARGET_KINDS:
        violations.append(f"unknown target profile '{cfg.target.kind}'")
    if cfg.base_control.kind not in CONTROL_KINDS:
        violations.append(f"unknown base control profile '{cfg.base_control.kind}'")
    return violations
