"""Modal states, the energy norm, delay history, and impulse bookkeeping.

A state is the pair of modal coefficient vectors (w, v) for position and
velocity.  The energy norm is sqrt(sum_j lam_j w_j^2 + sum_j v_j^2), the
natural norm for the damped wave system.  The delay history is stored as
uniform samples on [-r, 0] with the integrator step, so delayed lookups are
exact grid hits and never interpolate.
"""

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralBasis


@dataclass(frozen=True)
class ModelParams:
    """Damping eta, stiffness gamma, delay r, and horizon tau (all > 0, r < tau)."""

    eta: float
    gamma: float
    delay: float
    horizon: float

    def __post_init__(self):
        for name in ("eta", "gamma", "delay", "horizon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.delay >= self.horizon:
            raise ValueError(
                f"delay r={self.delay} must be smaller than horizon tau={self.horizon}"
            )


@dataclass(frozen=True)
class ModalState:
    """Position/velocity coefficient pair (w, v), one entry per mode."""

    w: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if w.shape != v.shape or w.ndim != 1:
            raise ValueError(f"w and v must be 1-d and matching, got {w.shape}, {v.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise ValueError("state coefficients must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def __add__(self, other: "ModalState") -> "ModalState":
        return ModalState(self.w + other.w, self.v + other.v)

    def __sub__(self, other: "ModalState") -> "ModalState":
        return ModalState(self.w - other.w, self.v - other.v)

    def __mul__(self, c: float) -> "ModalState":
        return ModalState(c * self.w, c * self.v)

    __rmul__ = __mul__

    @staticmethod
    def zero(n: int) -> "ModalState":
        return ModalState(np.zeros(n), np.zeros(n))


def z_half_norm(state: ModalState, basis: SpectralBasis) -> float:
    """Energy norm sqrt(sum lam_j w_j^2 + sum v_j^2)."""
    if state.n != basis.n_modes:
        raise ValueError(f"state has {state.n} modes, basis has {basis.n_modes}")
    return float(np.sqrt(basis.eigenvalues @ (state.w**2) + state.v @ state.v))


@dataclass(frozen=True)
class HistorySegment:
    """Uniform samples of (w, v) on [-r, 0]; sample k sits at (k - r/dt)*dt.

    The step must divide r exactly so row ``r/dt`` is the value at s = 0 and
    every delayed lookup lands on a stored row (``interpolation`` records
    that no interpolation rule is ever applied).
    """

    dt: float
    w: np.ndarray  # (r/dt + 1, N)
    v: np.ndarray
    interpolation: str = "grid-exact"

    def __post_init__(self):
        if self.w.shape != self.v.shape or self.w.ndim != 2:
            raise ValueError("history arrays must be 2-d with matching shapes")
        if self.w.shape[0] < 2:
            raise ValueError("history needs at least the endpoints of [-r, 0]")

    @property
    def n_steps(self) -> int:
        return self.w.shape[0] - 1

    @property
    def delay(self) -> float:
        return self.n_steps * self.dt

    def sample(self, k: int) -> ModalState:
        """State at s = (k - r/dt)*dt for k in 0..r/dt."""
        return ModalState(self.w[k].copy(), self.v[k].copy())

    def initial_state(self) -> ModalState:
        return self.sample(self.n_steps)

    @staticmethod
    def constant(state: ModalState, delay: float, dt: float) -> "HistorySegment":
        steps = exact_steps(delay, dt, "delay r")
        w = np.tile(state.w, (steps + 1, 1))
        v = np.tile(state.v, (steps + 1, 1))
        return HistorySegment(dt=dt, w=w, v=v)


def exact_steps(span: float, dt: float, what: str) -> int:
    """Number of steps in ``span``, insisting that dt divides it exactly."""
    k = int(round(span / dt))
    if k < 1 or abs(k * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"dt={dt} must divide {what}={span} exactly")
    return k


@dataclass(frozen=True)
class ImpulseEvent:
    """A single velocity jump: at time t the map ``kind`` with ``params`` fires."""

    time: float
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ImpulseSchedule:
    """Strictly increasing impulse times in (0, tau), one map per time."""

    events: tuple = ()

    def __post_init__(self):
        times = [e.time for e in self.events]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError(f"impulse times must be strictly increasing, got {times}")
        if any(t <= 0 for t in times):
            raise ValueError(f"impulse times must be positive, got {times}")

    @property
    def times(self) -> list:
        return [e.time for e in self.events]

    @property
    def last_time(self) -> float:
        return self.events[-1].time if self.events else 0.0

    def validate_against(self, horizon: float, dt: float):
        for e in self.events:
            if e.time >= horizon:
                raise ValueError(f"impulse time {e.time} must lie below tau={horizon}")
            exact_steps(e.time, dt, f"impulse time {e.time}")


def delayed_state(
    trajectory_w: np.ndarray,
    trajectory_v: np.ndarray,
    history: HistorySegment,
    index: int,
) -> ModalState:
    """State at grid time (index - r/dt)*dt, pulled from history or the run.

    ``index`` counts trajectory grid nodes (0 at t = 0); the delayed node
    index - r/dt falls in the history for index <= r/dt and in the stored
    trajectory afterwards.  Negative delayed nodes below -r are rejected.
    """
    r_steps = history.n_steps
    k = index - r_steps
    if k < -r_steps:
        raise ValueError(f"delayed index {k} precedes the stored history [-r, 0]")
    if k <= 0:
        return history.sample(k + r_steps)
    return ModalState(trajectory_w[k].copy(), trajectory_v[k].copy())


def apply_impulse(state: ModalState, impulse_coeffs: np.ndarray) -> ModalState:
    """Jump the velocity by the evaluated impulse; the position is untouched."""
    impulse_coeffs = np.asarray(impulse_coeffs, dtype=float)
    if impulse_coeffs.shape != state.v.shape:
        raise ValueError(
            f"impulse has shape {impulse_coeffs.shape}, state has {state.v.shape}"
        )
    return ModalState(state.w, state.v + impulse_coeffs)
