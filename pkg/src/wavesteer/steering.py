"""Three-phase steering runs, (alpha, delta) sweeps, and report plumbing.

A steering run follows the constructive recipe behind the approximate
controllability result:

    phase 1   integrate the full semilinear dynamics with the base control
              up to the handoff time tau - delta;
    phase 2   assemble the window Gramian, take the defect
              h = z_target - T(delta) z(tau - delta), and synthesize the
              regularized tail control u_alpha;
    phase 3   continue the same trajectory with the tail control to tau.

Because delta is smaller than the delay, every delayed argument the tail
phase reads predates the handoff, so the synthesized control never feeds
back into its own nonlinear forcing; the run records the furthest delayed
index it touched so this can be asserted rather than believed.

Alongside the nonlinear run the harness propagates the linear comparison
y(tau) = T(delta) z(tau - delta) + G u_alpha, whose distance to the target
is the analytic residual alpha*(alpha I + Q)^{-1} h.  The reported final
error then splits into the linear residual plus the nonlinear
perturbation, the discrete shadow of the epsilon/2 + epsilon/2 argument.
"""

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .config import ExperimentConfig, build_base_control, build_history, build_target
from .dynamics import SolverAbort, Trajectory, WaveIntegrator
from .gramian import (
    ControlSignal,
    GramianData,
    SteeringWindow,
    assemble_gramian,
    energy_vector,
    synthesize_tail,
)
from .semigroup import Semigroup
from .spectral import OverlapMatrix, SpectralBasis, build_basis, overlap_matrix
from .state import HistorySegment, ModalState, exact_steps, z_half_norm


@dataclass(frozen=True)
class Setup:
    """Everything a config builds once and every run shares."""

    cfg: ExperimentConfig
    basis: SpectralBasis
    semigroup: Semigroup
    overlap: OverlapMatrix
    integrator: WaveIntegrator
    history: HistorySegment
    target: ModalState
    base: Optional[Callable[[float], np.ndarray]]


def build_setup(cfg: ExperimentConfig) -> Setup:
    basis = build_basis(cfg.domain, cfg.n_modes)
    semigroup = Semigroup(basis, cfg.model.eta, cfg.model.gamma)
    overlap = overlap_matrix(basis, cfg.actuator)
    integrator = WaveIntegrator(
        basis=basis,
        domain=cfg.domain,
        semigroup=semigroup,
        overlap=overlap,
        nonlinearity=cfg.nonlinearity,
        kernel=cfg.kernel,
        schedule=cfg.schedule,
        solver=cfg.solver,
        delay=cfg.model.delay,
        horizon=cfg.model.horizon,
    )
    return Setup(
        cfg=cfg,
        basis=basis,
        semigroup=semigroup,
        overlap=overlap,
        integrator=integrator,
        history=build_history(cfg, basis),
        target=build_target(cfg, basis),
        base=build_base_control(cfg, basis),
    )


@dataclass
class SteeringRow:
    """One (alpha, delta) outcome; norms are energy norms."""

    alpha: float
    delta: float
    final_error: float = math.nan
    linear_residual: float = math.nan
    nonlinear_perturbation: float = math.nan
    uncontrolled_error: float = math.nan
    q_min: float = math.nan
    delay_frozen: bool = False
    phase1_seconds: float = math.nan
    phase2_seconds: float = math.nan
    phase3_seconds: float = math.nan
    status: str = "ok"

    COLUMNS = (
        "alpha",
        "delta",
        "final_error",
        "linear_residual",
        "nonlinear_perturbation",
        "uncontrolled_error",
        "q_min",
        "delay_frozen",
        "phase1_seconds",
        "phase2_seconds",
        "phase3_seconds",
        "status",
    )

    def as_row(self) -> list:
        return [getattr(self, name) for name in self.COLUMNS]


@dataclass
class SteeringOutcome:
    """Row plus the artifacts a caller may want to inspect or export."""

    row: SteeringRow
    trajectory: Optional[Trajectory] = None
    gramian: Optional[GramianData] = None
    tail: Optional[ControlSignal] = None


def _phase1(setup: Setup, delta: float) -> Trajectory:
    """Base-control run up to the handoff time tau - delta."""
    cfg = setup.cfg
    window = SteeringWindow(cfg.model.horizon, delta, cfg.quadrature_nodes)
    base_signal = ControlSignal(
        semigroup=setup.semigroup, overlap=setup.overlap, window=window, base=setup.base
    )
    traj = setup.integrator.start(setup.history)
    setup.integrator.extend(traj, base_signal, cfg.model.horizon - delta)
    return traj


def run_steering(
    setup: Setup,
    alpha: float,
    delta: float,
    phase1: Optional[Trajectory] = None,
    gramian: Optional[GramianData] = None,
) -> SteeringOutcome:
    """One steering run; optionally reuses a cached phase-1 run and Gramian."""
    cfg = setup.cfg
    basis = setup.basis
    row = SteeringRow(alpha=alpha, delta=delta)
    window = SteeringWindow(cfg.model.horizon, delta, cfg.quadrature_nodes)
    handoff_index = exact_steps(cfg.model.horizon - delta, cfg.solver.dt, "handoff time")

    tic = time.perf_counter()
    if phase1 is None:
        phase1 = _phase1(setup, delta)
    row.phase1_seconds = time.perf_counter() - tic

    tic = time.perf_counter()
    if gramian is None:
        gramian = assemble_gramian(setup.semigroup, setup.overlap, window)
    row.q_min = gramian.q_min
    handoff = phase1.state(handoff_index)
    tail = synthesize_tail(
        gramian, setup.semigroup, setup.overlap, alpha, handoff, setup.target,
        base=setup.base,
    )
    row.linear_residual = float(alpha * np.linalg.norm(tail.x_hat))
    row.phase2_seconds = time.perf_counter() - tic

    tic = time.perf_counter()
    steered = phase1.copy()
    setup.integrator.extend(steered, tail, cfg.model.horizon)
    if delta < cfg.model.delay:
        row.delay_frozen = steered.last_extend_max_delayed <= handoff_index
    target_vec = energy_vector(setup.target, basis)
    final_vec = energy_vector(steered.final_state(), basis)
    row.final_error = float(np.linalg.norm(final_vec - target_vec))

    # linear comparison through the same quadrature rule as the Gramian
    flown = setup.semigroup.apply(delta, handoff)
    tail_nodes = np.stack(
        [gramian.node_maps[k].T @ tail.x_hat for k in range(len(gramian.nodes))]
    )
    linear_final = energy_vector(flown, basis) + gramian.apply_control(tail_nodes)
    row.nonlinear_perturbation = float(np.linalg.norm(final_vec - linear_final))

    # uncontrolled continuation from the same handoff state
    uncontrolled = phase1.copy()
    base_signal = ControlSignal(
        semigroup=setup.semigroup, overlap=setup.overlap, window=window, base=setup.base
    )
    setup.integrator.extend(uncontrolled, base_signal, cfg.model.horizon)
    row.uncontrolled_error = float(
        np.linalg.norm(energy_vector(uncontrolled.final_state(), basis) - target_vec)
    )
    row.phase3_seconds = time.perf_counter() - tic

    return SteeringOutcome(row=row, trajectory=steered, gramian=gramian, tail=tail)


def sweep(setup: Setup) -> List[SteeringRow]:
    """Grid of steering runs over the configured alpha and delta lists.

    Phase-1 trajectories and Gramians are cached per delta, so every row
    with the same delta shares a bitwise-identical phase 1.  Row failures
    are recorded in the status column without aborting the sweep.
    """
    rows = []
    phase1_cache: Dict[float, Trajectory] = {}
    gramian_cache: Dict[float, GramianData] = {}
    for delta in setup.cfg.deltas:
        for alpha in setup.cfg.alphas:
            try:
                if delta not in phase1_cache:
                    phase1_cache[delta] = _phase1(setup, delta)
                    gramian_cache[delta] = assemble_gramian(
                        setup.semigroup,
                        setup.overlap,
                        SteeringWindow(
                            setup.cfg.model.horizon, delta, setup.cfg.quadrature_nodes
                        ),
                    )
                outcome = run_steering(
                    setup,
                    alpha,
                    delta,
                    phase1=phase1_cache[delta],
                    gramian=gramian_cache[delta],
                )
                rows.append(outcome.row)
            except (SolverAbort, ValueError, RuntimeError) as exc:
                failed = SteeringRow(alpha=alpha, delta=delta, status=f"failed: {exc}")
                rows.append(failed)
    return rows


def growth_envelope(
    setup: Setup,
    u_sup: float,
    times: np.ndarray,
) -> np.ndarray:
    """A priori bound on the trajectory energy norm from the declared constants.

    Uses the semigroup bound ||T(t)|| <= M, the affine growth of f, the
    kernel essential bound with |g| <= 1, and the impulse map caps; the
    delayed dependence is absorbed by a Gronwall factor on the running
    supremum.  Every quantity is a bound, so the envelope is conservative.
    """
    cfg = setup.cfg
    basis = setup.basis
    m_const, _ = setup.semigroup.decay_envelope(max(float(times[-1]), cfg.solver.dt))
    m_const = max(1.0, m_const)
    lam1 = float(basis.eigenvalues[0])
    sqrt_l = math.sqrt(cfg.domain.length)

    nl = cfg.nonlinearity
    a_tilde = nl.a0 * math.sqrt(1.0 + 1.0 / lam1)
    b_tilde = nl.b0 * sqrt_l
    g_sup = 0.0 if nl.g_id == "zero" else sqrt_l
    overlap_norm = float(np.linalg.norm(setup.overlap.matrix, 2))

    hist = setup.history
    history_sup = max(
        z_half_norm(ModalState(hist.w[k], hist.v[k]), basis)
        for k in range(hist.n_steps + 1)
    )

    impulse_caps = []
    for event in cfg.schedule.events:
        if event.kind == "constant_kick":
            impulse_caps.append((event.time, abs(float(event.params["amplitude"])) * sqrt_l))
        else:
            impulse_caps.append((event.time, abs(float(event.params.get("clip", 1.0))) * sqrt_l))

    env = np.empty(len(times))
    for i, t in enumerate(times):
        forced = (b_tilde + overlap_norm * u_sup) * t
        forced += cfg.kernel.bound * g_sup * 0.5 * t * t
        forced += sum(cap for t_k, cap in impulse_caps if t_k <= t)
        c_t = m_const * (history_sup + forced)
        env[i] = c_t * math.exp(m_const * a_tilde * t)
    return env


# -- output plumbing -------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_report(rows: List[SteeringRow], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SteeringRow.COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row.as_row()])


def write_trajectory(traj: Trajectory, basis, path) -> None:
    """Grid rows plus explicit pre/post rows at impulses; event column marks them."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = basis.n_modes
    header = (
        ["t", "energy_norm", "event"]
        + [f"w_{j}" for j in range(1, n + 1)]
        + [f"v_{j}" for j in range(1, n + 1)]
    )
    pre = {rec.index: rec for rec in traj.records}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(traj.n_steps + 1):
            t = i * traj.dt
            if i in pre:
                rec = pre[i]
                state = ModalState(rec.w_before, rec.v_before)
                writer.writerow(
                    [_fmt(t), _fmt(z_half_norm(state, basis)), "pre-impulse"]
                    + [_fmt(x) for x in rec.w_before]
                    + [_fmt(x) for x in rec.v_before]
                )
            event = "post-impulse" if i in pre else ""
            state = traj.state(i)
            writer.writerow(
                [_fmt(t), _fmt(z_half_norm(state, basis)), event]
                + [_fmt(x) for x in state.w]
                + [_fmt(x) for x in state.v]
            )


def write_spectrum(gram: GramianData, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "eigenvalue"])
        for i, val in enumerate(gram.eigenvalues):
            writer.writerow([i, _fmt(float(val))])
