"""Time stepping for the semilinear system with memory, delay, and impulses.

The modal system is

    z'(t) = A z(t) + B u(t) + (0, m(t)) + (0, f^e(t, w(t-r), v(t-r), u(t)))

with m(t) the memory convolution integral of M(t,s) against g(w(s-r)) and
velocity jumps at the impulse times.  Because every forcing term depends on
the state only through the delay (and r >= dt), the right-hand side on a
step [t_n, t_n + dt] is a fully known function of time once the trajectory
has reached t_n.  The stepper therefore propagates the stiff linear part
exactly with the closed-form block exponential and applies the trapezoid
rule to the known forcing:

    z_{n+1} = E z_n + dt/2 * (E Phi(t_n+) + Phi(t_{n+1}-)),   E = exp(A dt)

which is second order.  The one-sided evaluations matter at the two kinds
of forcing discontinuity: the control seam at tau - delta and delayed
views of an impulse.  Each step sees the one-sided limits that make its
forcing the restriction of a smooth function to the closed step interval,
so the order is not degraded there.

Nonlinearities act pointwise on collocation fields (synthesize, apply,
analyze back).  The memory integrand g takes the delayed position only;
positions are continuous across impulses, so the memory term never sees a
jump.  Time steps must divide the delay, the horizon, and every impulse
time, which keeps every delayed lookup an exact grid hit.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .gramian import ControlSignal
from .semigroup import Semigroup
from .spectral import DomainSpec, OverlapMatrix, SpectralBasis, analyze_field, synthesize_field
from .state import HistorySegment, ImpulseSchedule, ModalState, exact_steps


class SolverAbort(RuntimeError):
    """Raised when the state leaves the finite range; carries the grid time."""

    def __init__(self, time: float, message: str):
        super().__init__(f"solver abort at t={time}: {message}")
        self.time = time


def _f_zero(params: dict) -> Callable:
    def f(t, w, v, u):
        return np.zeros_like(w)

    return f


def _f_saturated_linear(params: dict) -> Callable:
    a0 = float(params["a0"])
    b0 = float(params["b0"])

    # |tanh(s)| <= s for s >= 0, so |f| <= a0*hypot(w,v) + b0 pointwise.
    def f(t, w, v, u):
        return a0 * np.tanh(np.hypot(w, v)) + b0 * math.cos(t)

    return f


def _f_saturated_u(params: dict) -> Callable:
    a0 = float(params["a0"])
    b0 = float(params["b0"])

    # |tanh(v)| <= |v| <= hypot(w,v) and |sin(u)| <= 1.
    def f(t, w, v, u):
        return a0 * np.tanh(v) + b0 * np.sin(u)

    return f


def _f_quadratic(params: dict) -> Callable:
    # Ships to exercise the growth validator; violates the affine bound.
    def f(t, w, v, u):
        return w**2

    return f


F_REGISTRY = {
    "zero": _f_zero,
    "saturated_linear": _f_saturated_linear,
    "saturated_u": _f_saturated_u,
    "quadratic": _f_quadratic,
}

G_REGISTRY = {
    "zero": lambda w: np.zeros_like(w),
    "sin": np.sin,
    "tanh": np.tanh,
}


def _impulse_constant_kick(params: dict) -> Callable:
    amplitude = float(params["amplitude"])

    def kick(t, w, v, u):
        return np.full_like(v, amplitude)

    return kick


def _impulse_proportional_v(params: dict) -> Callable:
    c = float(params["gain"])
    cap = float(params.get("clip", 1.0))

    def kick(t, w, v, u):
        return np.clip(c * v, -cap, cap)

    return kick


IMPULSE_REGISTRY = {
    "constant_kick": _impulse_constant_kick,
    "proportional_v": _impulse_proportional_v,
}


@dataclass(frozen=True)
class NonlinearitySpec:
    """Registry selection for the forcing f and the memory integrand g.

    f_params must carry the declared growth constants a0, b0; the validator
    samples |f(t,w,v,u)| against a0*hypot(w,v) + b0 and rejects violators.
    """

    f_id: str = "zero"
    f_params: dict = field(default_factory=lambda: {"a0": 0.0, "b0": 0.0})
    g_id: str = "zero"

    def __post_init__(self):
        if self.f_id not in F_REGISTRY:
            raise ValueError(f"unknown forcing '{self.f_id}', have {sorted(F_REGISTRY)}")
        if self.g_id not in G_REGISTRY:
            raise ValueError(f"unknown memory integrand '{self.g_id}', have {sorted(G_REGISTRY)}")
        for key in ("a0", "b0"):
            if key not in self.f_params:
                raise ValueError(f"f_params must declare growth constant '{key}'")

    def forcing(self) -> Callable:
        return F_REGISTRY[self.f_id](self.f_params)

    def integrand(self) -> Callable:
        return G_REGISTRY[self.g_id]

    @property
    def a0(self) -> float:
        return float(self.f_params["a0"])

    @property
    def b0(self) -> float:
        return float(self.f_params["b0"])


def validate_growth(
    spec: NonlinearitySpec,
    n_probes: int = 400,
    seed: int = 20240,
    tol: float = 1e-9,
) -> List[str]:
    """Sample the declared affine bound on f over a deterministic probe set.

    Probes cover several magnitudes of (w, v, u) and times in [0, 10].
    Returns human-readable violations; empty means the bound held.
    """
    f = spec.forcing()
    rng = np.random.default_rng(seed)
    violations = []
    for scale in (0.1, 1.0, 10.0):
        t = rng.uniform(0.0, 10.0, n_probes)
        w = scale * rng.standard_normal(n_probes)
        v = scale * rng.standard_normal(n_probes)
        u = scale * rng.standard_normal(n_probes)
        for i in range(n_probes):
            value = float(np.asarray(f(t[i], w[i:i + 1], v[i:i + 1], u[i:i + 1]))[0])
            bound = spec.a0 * math.hypot(w[i], v[i]) + spec.b0
            if abs(value) > bound + tol:
                violations.append(
                    f"|f({t[i]:.3g}, {w[i]:.3g}, {v[i]:.3g}, {u[i]:.3g})| = "
                    f"{abs(value):.6g} exceeds a0*hypot + b0 = {bound:.6g}"
                )
                if len(violations) >= 5:
                    return violations
    return violations


@dataclass(frozen=True)
class MemoryKernel:
    """Convolution kernel M(t, s): constant m0 or exponential m0*exp(-kappa(t-s))."""

    kind: str = "constant"
    m0: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "exponential"):
            raise ValueError(f"unknown kernel kind '{self.kind}'")
        if not math.isfinite(self.m0):
            raise ValueError("kernel amplitude m0 must be finite")
        if self.kappa < 0:
            raise ValueError(f"kernel rate kappa must be >= 0, got {self.kappa}")
        if self.kind == "constant" and self.kappa != 0.0:
            raise ValueError("constant kernel takes no rate; use kind='exponential'")

    @property
    def bound(self) -> float:
        """Essential sup of |M| on t >= s."""
        return abs(self.m0)

    def value(self, t: float, s: float) -> float:
        if self.kappa == 0.0:
            return self.m0
        return self.m0 * math.exp(-self.kappa * (t - s))


MEMORY_RULES = ("trapezoid", "exponential-recursion")


@dataclass(frozen=True)
class SolverConfig:
    """Step size and scheme/memory-rule tags.

    dt must divide the delay, the horizon, every impulse time, and any
    steering-window width used with it; the run-level checks live in config
    validation, the dt > 0 and tag checks here.
    """

    dt: float
    scheme: str = "exponential-heun"
    memory_rule: str = "trapezoid"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme != "exponential-heun":
            raise ValueError(f"unknown scheme '{self.scheme}'")
        if self.memory_rule not in MEMORY_RULES:
            raise ValueError(
                f"unknown memory rule '{self.memory_rule}', have {MEMORY_RULES}"
            )


@dataclass(frozen=True)
class ImpulseRecord:
    """One applied jump: v after = v before + coeffs, w untouched."""

    index: int
    time: float
    coeffs: np.ndarray
    w_before: np.ndarray
    v_before: np.ndarray


@dataclass
class Trajectory:
    """Grid samples of the run plus the caches the stepper carries along.

    Arrays hold one row per grid node; at impulse nodes the row is the
    post-jump state (the process-space convention) and the pre-jump state
    is kept in ``records``.  ``g_coeffs`` are the modal coefficients of
    g(w(t - r)) and ``mem`` the memory integral, both per node, so a run
    can be extended without recomputing its past.
    """

    dt: float
    n_steps: int
    w: np.ndarray
    v: np.ndarray
    g_coeffs: np.ndarray
    mem: np.ndarray
    history: HistorySegment
    records: List[ImpulseRecord] = field(default_factory=list)
    last_extend_max_delayed: int = -10**9

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def final_time(self) -> float:
        return self.dt * self.n_steps

    def state(self, index: int) -> ModalState:
        if not 0 <= index <= self.n_steps:
            raise IndexError(f"index {index} outside the integrated range")
        return ModalState(self.w[index].copy(), self.v[index].copy())

    def final_state(self) -> ModalState:
        return self.state(self.n_steps)

    def pre_impulse(self, index: int) -> Optional[ImpulseRecord]:
        for rec in self.records:
            if rec.index == index:
                return rec
        return None

    def copy(self) -> "Trajectory":
        return Trajectory(
            dt=self.dt,
            n_steps=self.n_steps,
            w=self.w.copy(),
            v=self.v.copy(),
            g_coeffs=self.g_coeffs.copy(),
            mem=self.mem.copy(),
            history=self.history,
            records=list(self.records),
            last_extend_max_delayed=self.last_extend_max_delayed,
        )


class WaveIntegrator:
    """Exponential trapezoid stepper for one model configuration.

    Holds everything that does not change between runs: the basis, the
    actuator overlap, the precomputed step propagator, the nonlinearity
    callables, the kernel, and the impulse schedule.  ``start``/``extend``
    give phased runs a shared prefix; ``run`` is the one-shot convenience.
    """

    def __init__(
        self,
        basis: SpectralBasis,
        domain: DomainSpec,
        semigroup: Semigroup,
        overlap: OverlapMatrix,
        nonlinearity: NonlinearitySpec,
        kernel: MemoryKernel,
        schedule: ImpulseSchedule,
        solver: SolverConfig,
        delay: float,
        horizon: float,
    ):
        if semigroup.basis is not basis and semigroup.basis.n_modes != basis.n_modes:
            raise ValueError("semigroup and integrator must share the basis")
        self.basis = basis
        self.domain = domain
        self.semigroup = semigroup
        self.overlap = overlap
        self.nonlinearity = nonlinearity
        self.kernel = kernel
        self.schedule = schedule
        self.solver = solver
        self.horizon = horizon
        self.dt = solver.dt
        self.r_steps = exact_steps(delay, self.dt, "delay r")
        self.total_steps = exact_steps(horizon, self.dt, "horizon tau")
        schedule.validate_against(horizon, self.dt)
        self.impulse_indices: Dict[int, Callable] = {}
        for event in schedule.events:
            idx = int(round(event.time / self.dt))
            self.impulse_indices[idx] = IMPULSE_REGISTRY[event.kind](event.params)

        self._f = nonlinearity.forcing()
        self._g = nonlinearity.integrand()
        self._f_is_zero = nonlinearity.f_id == "zero"
        self._g_is_zero = nonlinearity.g_id == "zero"

        step_blocks = semigroup.block_exp(self.dt)
        self._e00 = step_blocks[:, 0, 0].copy()
        self._e01 = step_blocks[:, 0, 1].copy()
        self._e10 = step_blocks[:, 1, 0].copy()
        self._e11 = step_blocks[:, 1, 1].copy()

    # -- delayed lookups ---------------------------------------------------

    def _delayed(self, traj: Trajectory, index: int, side: str) -> ModalState:
        """State at grid node ``index - r_steps`` with the requested limit.

        side='left' asks for the limit from below, which differs from the
        stored (post-impulse) row exactly when the delayed node is an
        impulse node.
        """
        k = index - self.r_steps
        if k <= 0:
            return traj.history.sample(k + self.r_steps)
        if side == "left":
            rec = traj.pre_impulse(k)
            if rec is not None:
                return ModalState(rec.w_before.copy(), rec.v_before.copy())
        return ModalState(traj.w[k].copy(), traj.v[k].copy())

    def _delayed_position(self, traj: Trajectory, index: int) -> np.ndarray:
        """Delayed position row; positions are continuous, so no side needed."""
        k = index - self.r_steps
        if k <= 0:
            return traj.history.w[k + self.r_steps]
        return traj.w[k]

    # -- memory ------------------------------------------------------------

    def _g_row(self, traj: Trajectory, index: int) -> np.ndarray:
        if self._g_is_zero:
            return np.zeros(self.basis.n_modes)
        w_field = synthesize_field(self.basis, self.domain, self._delayed_position(traj, index))
        return analyze_field(self.basis, self.domain, self._g(w_field))

    def _advance_memory(self, traj: Trajectory, new_index: int):
        """Fill g_coeffs[new_index] and mem[new_index] from rows <= new_index."""
        traj.g_coeffs[new_index] = self._g_row(traj, new_index)
        if self._g_is_zero or self.kernel.m0 == 0.0:
            traj.mem[new_index] = 0.0
            return
        h = self.dt
        if self.solver.memory_rule == "exponential-recursion":
            decay = math.exp(-self.kernel.kappa * h)
            traj.mem[new_index] = decay * traj.mem[new_index - 1] + (
                0.5 * h * self.kernel.m0
            ) * (decay * traj.g_coeffs[new_index - 1] + traj.g_coeffs[new_index])
            return
        t = new_index * h
        s = h * np.arange(new_index + 1)
        weights = np.full(new_index + 1, h)
        weights[0] = weights[-1] = 0.5 * h
        if self.kernel.kappa == 0.0:
            kernel_vals = np.full(new_index + 1, self.kernel.m0)
        else:
            kernel_vals = self.kernel.m0 * np.exp(-self.kernel.kappa * (t - s))
        traj.mem[new_index] = (weights * kernel_vals) @ traj.g_coeffs[: new_index + 1]

    # -- forcing -----------------------------------------------------------

    def _forcing(
        self, traj: Trajectory, index: int, control: ControlSignal, side: str
    ) -> np.ndarray:
        """Velocity-component forcing at grid node ``index`` (one-sided)."""
        t = index * self.dt
        u = control.value(t) if side == "right" else control.value_left(t)
        out = self.overlap.apply(u) + traj.mem[index]
        if not self._f_is_zero:
            delayed = self._delayed(traj, index, side)
            w_field = synthesize_field(self.basis, self.domain, delayed.w)
            v_field = synthesize_field(self.basis, self.domain, delayed.v)
            u_field = synthesize_field(self.basis, self.domain, u)
            out = out + analyze_field(
                self.basis, self.domain, self._f(t, w_field, v_field, u_field)
            )
        return out

    # -- stepping ----------------------------------------------------------

    def start(self, history: HistorySegment) -> Trajectory:
        """Allocate a trajectory seeded with the history's s = 0 state."""
        if history.dt != self.dt:
            raise ValueError(
                f"history step {history.dt} differs from solver step {self.dt}"
            )
        if history.n_steps != self.r_steps:
            raise ValueError(
                f"history spans {history.n_steps} steps, delay needs {self.r_steps}"
            )
        n = self.basis.n_modes
        total = self.total_steps
        traj = Trajectory(
            dt=self.dt,
            n_steps=0,
            w=np.zeros((total + 1, n)),
            v=np.zeros((total + 1, n)),
            g_coeffs=np.zeros((total + 1, n)),
            mem=np.zeros((total + 1, n)),
            history=history,
        )
        start_state = history.initial_state()
        traj.w[0] = start_state.w
        traj.v[0] = start_state.v
        traj.g_coeffs[0] = self._g_row(traj, 0)
        return traj

    def extend(self, traj: Trajectory, control: ControlSignal, t_end: float) -> Trajectory:
        """Integrate the trajectory forward to t_end (an exact grid time).

        Mutates ``traj`` in place and returns it.  Records the largest
        delayed node index touched, for the delay-freezing check on tail
        phases.
        """
        end_index = exact_steps(t_end, self.dt, "segment end time")
        if end_index > self.total_steps:
            raise ValueError(f"t_end={t_end} exceeds the horizon {self.horizon}")
        if end_index < traj.n_steps:
            raise ValueError(
                f"trajectory already reaches {traj.final_time}, cannot rewind to {t_end}"
            )
        max_delayed = -(10**9)
        half = 0.5 * self.dt
        for n in range(traj.n_steps, end_index):
            phi_left = self._forcing(traj, n, control, side="right")
            self._advance_memory(traj, n + 1)
            phi_right = self._forcing(traj, n + 1, control, side="left")
            max_delayed = max(max_delayed, n + 1 - self.r_steps)

            w_n, v_n = traj.w[n], traj.v[n]
            w1 = self._e00 * w_n + self._e01 * (v_n + half * phi_left)
            v1 = self._e10 * w_n + self._e11 * (v_n + half * phi_left) + half * phi_right
            if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(v1))):
                raise SolverAbort((n + 1) * self.dt, "state left the finite range")

            kick = self.impulse_indices.get(n + 1)
            if kick is not None:
                coeffs = self._impulse_coeffs(kick, n + 1, w1, v1, control)
                traj.records.append(
                    ImpulseRecord(
                        index=n + 1,
                        time=(n + 1) * self.dt,
                        coeffs=coeffs,
                        w_before=w1.copy(),
                        v_before=v1.copy(),
                    )
                )
                v1 = v1 + coeffs
            traj.w[n + 1] = w1
            traj.v[n + 1] = v1
            traj.n_steps = n + 1
        traj.last_extend_max_delayed = max_delayed
        return traj

    def _impulse_coeffs(
        self, kick: Callable, index: int, w: np.ndarray, v: np.ndarray, control: ControlSignal
    ) -> np.ndarray:
        t = index * self.dt
        w_field = synthesize_field(self.basis, self.domain, w)
        v_field = synthesize_field(self.basis, self.domain, v)
        u_field = synthesize_field(self.basis, self.domain, control.value(t))
        return analyze_field(self.basis, self.domain, kick(t, w_field, v_field, u_field))

    def run(
        self,
        history: HistorySegment,
        control: ControlSignal,
        t_end: Optional[float] = None,
    ) -> Trajectory:
        """Integrate from the history to t_end (default: the horizon)."""
        traj = self.start(history)
        return self.extend(traj, control, self.horizon if t_end is None else t_end)
