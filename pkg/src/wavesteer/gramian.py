"""Controllability map, Gramian, and regularized steering controls.

The control enters through the velocity component only, masked to the
actuator region: in modal coordinates B u = (0, O u) with O the actuator
overlap matrix.  The steering objects live on a window [tau - delta, tau]:

    (G u)        = integral of T(tau - s) B u(s) ds over the window
    (G* z)(s)    = B* T(tau - s)* z
    Q            = G G*  (the controllability Gramian)
    u_alpha(s)   = (G* x)(s),  x = (alpha I + Q)^{-1} h

where h is the defect the window has to close.  Everything here is
assembled in energy coordinates (sqrt(lam_j) w_j, v_j), stacked as a flat
vector [sqrt(lam)*w, v] of length 2N.  In these coordinates the energy
inner product is Euclidean, so Q is an ordinary symmetric PSD matrix and
adjoints are transposes.

G and Q share one Gauss-Legendre rule.  Applying G to the control
u_alpha sampled at the shared nodes reproduces Q x up to roundoff, which
makes the residual identity  G u_alpha = h - alpha (alpha I + Q)^{-1} h
hold at machine precision rather than at quadrature accuracy.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .semigroup import Semigroup
from .spectral import OverlapMatrix, SpectralBasis
from .state import ModalState


@dataclass(frozen=True)
class SteeringWindow:
    """Horizon tau, active-control width delta, and the quadrature node count.

    0 < delta <= tau is checked here; the run-level constraints delta < r
    and delta < tau - t_p need the delay and the impulse schedule and are
    enforced by config validation.
    """

    horizon: float
    width: float
    n_nodes: int = 64

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError(f"horizon tau must be positive, got {self.horizon}")
        if not 0 < self.width <= self.horizon:
            raise ValueError(
                f"width delta must lie in (0, tau]={self.horizon}, got {self.width}"
            )
        if self.n_nodes < 2:
            raise ValueError(f"need at least 2 quadrature nodes, got {self.n_nodes}")

    @property
    def start(self) -> float:
        return self.horizon - self.width

    @property
    def edge_tol(self) -> float:
        """Slack for seam comparisons: grid times carry roundoff from n*dt."""
        return 1e-9 * max(1.0, self.horizon)

    def contains(self, t: float) -> bool:
        return self.start - self.edge_tol <= t <= self.horizon + self.edge_tol


def energy_vector(state: ModalState, basis: SpectralBasis) -> np.ndarray:
    """Stack a modal state into the flat energy-coordinate vector."""
    return np.concatenate([basis.sqrt_eigenvalues * state.w, state.v])


def state_from_energy(vec: np.ndarray, basis: SpectralBasis) -> ModalState:
    """Invert :func:`energy_vector`."""
    n = basis.n_modes
    if vec.shape != (2 * n,):
        raise ValueError(f"expected a flat vector of length {2 * n}, got {vec.shape}")
    return ModalState(vec[:n] / basis.sqrt_eigenvalues, vec[n:].copy())


def window_nodes(window: SteeringWindow, n_nodes: Optional[int] = None) -> tuple:
    """Gauss-Legendre nodes and weights on [tau - delta, tau]."""
    if n_nodes is None:
        n_nodes = window.n_nodes
    if n_nodes < 2:
        raise ValueError(f"need at least 2 quadrature nodes, got {n_nodes}")
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * window.width
    return window.start + half * (x + 1.0), half * w


def input_map(u_coeffs: np.ndarray, overlap: OverlapMatrix) -> ModalState:
    """B u: the control coefficients enter the velocity through the overlap."""
    u_coeffs = np.asarray(u_coeffs, dtype=float)
    return ModalState(np.zeros(overlap.n), overlap.apply(u_coeffs))


def _node_input_map(semigroup: Semigroup, overlap: OverlapMatrix, t: float) -> np.ndarray:
    """T(t) B in energy coordinates as a dense (2N, N) matrix.

    Column c is T(t) applied to the state (0, O e_c); the blocks act
    elementwise across modes, so only two diagonal scalings of O appear.
    """
    blocks = semigroup.energy_block_exp(t)
    top = blocks[:, 0, 1][:, None] * overlap.matrix
    bottom = blocks[:, 1, 1][:, None] * overlap.matrix
    return np.vstack([top, bottom])


@dataclass(frozen=True)
class GramianData:
    """Gramian matrix with its quadrature rule and per-node input maps.

    ``node_maps[k]`` is T(tau - s_k) B, so G u = sum_k weights[k] *
    node_maps[k] @ u(s_k) and Q = sum_k weights[k] * node_maps[k] @
    node_maps[k].T use one and the same rule.
    """

    window: SteeringWindow
    matrix: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    node_maps: np.ndarray
    eigenvalues: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"gramian must be square, got {self.matrix.shape}")
        object.__setattr__(self, "eigenvalues", np.sort(eigh(self.matrix, eigvals_only=True)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def q_min(self) -> float:
        return float(self.eigenvalues[0])

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def apply_control(self, node_values: np.ndarray) -> np.ndarray:
        """G u for a control given by its values at the quadrature nodes."""
        if node_values.shape != (len(self.nodes), self.node_maps.shape[2]):
            raise ValueError(
                f"expected node values of shape "
                f"{(len(self.nodes), self.node_maps.shape[2])}, got {node_values.shape}"
            )
        out = np.zeros(self.dim)
        for k in range(len(self.nodes)):
            out += self.weights[k] * (self.node_maps[k] @ node_values[k])
        return out

    def solve_regularized(self, alpha: float, rhs: np.ndarray) -> np.ndarray:
        """x = (alpha I + Q)^{-1} rhs via Cholesky; alpha > 0 keeps it SPD."""
        if alpha <= 0:
            raise ValueError(f"regularization alpha must be positive, got {alpha}")
        shifted = self.matrix + alpha * np.eye(self.dim)
        try:
            return cho_solve(cho_factor(shifted), rhs)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(
                f"factorization of alpha*I + Q failed at alpha={alpha}; "
                f"min gramian eigenvalue is {self.q_min}"
            ) from exc


def assemble_gramian(
    semigroup: Semigroup,
    overlap: OverlapMatrix,
    window: SteeringWindow,
    n_nodes: Optional[int] = None,
) -> GramianData:
    """Quadrature assembly of Q = integral T(tau-s) B B* T(tau-s)* ds."""
    if overlap.n != semigroup.basis.n_modes:
        raise ValueError(
            f"overlap is {overlap.n}x{overlap.n}, basis has {semigroup.basis.n_modes} modes"
        )
    nodes, weights = window_nodes(window, n_nodes)
    dim = 2 * semigroup.basis.n_modes
    maps = np.empty((len(nodes), dim, overlap.n))
    q = np.zeros((dim, dim))
    for k, s in enumerate(nodes):
        maps[k] = _node_input_map(semigroup, overlap, window.horizon - s)
        q += weights[k] * (maps[k] @ maps[k].T)
    q = 0.5 * (q + q.T)
    return GramianData(window=window, matrix=q, nodes=nodes, weights=weights, node_maps=maps)


def adjoint_control_at(
    semigroup: Semigroup,
    overlap: OverlapMatrix,
    window: SteeringWindow,
    vec: np.ndarray,
    t: float,
) -> np.ndarray:
    """(G* vec)(t) = B* T(tau - t)* vec for an energy-coordinate vec.

    The remaining time is clamped at 0: grid times can land one ulp past
    the horizon.
    """
    m = _node_input_map(semigroup, overlap, max(window.horizon - t, 0.0))
    return m.T @ vec


def adjoint_map(
    semigroup: Semigroup,
    overlap: OverlapMatrix,
    window: SteeringWindow,
    state: ModalState,
    t: float,
) -> np.ndarray:
    """(G* z)(t) for a modal state z; t must lie inside the window."""
    if not window.contains(t):
        raise ValueError(
            f"t={t} lies outside the window [{window.start}, {window.horizon}]"
        )
    vec = energy_vector(state, semigroup.basis)
    return adjoint_control_at(semigroup, overlap, window, vec, t)


def controllability_map(
    semigroup: Semigroup,
    overlap: OverlapMatrix,
    window: SteeringWindow,
    control: Callable[[float], np.ndarray],
    n_nodes: Optional[int] = None,
) -> ModalState:
    """G u for a control function on the window, by Gauss-Legendre quadrature."""
    nodes, weights = window_nodes(window, n_nodes)
    out = np.zeros(2 * semigroup.basis.n_modes)
    for s, w in zip(nodes, weights):
        m = _node_input_map(semigroup, overlap, window.horizon - s)
        out += w * (m @ np.asarray(control(s), dtype=float))
    return state_from_energy(out, semigroup.basis)


def steering_error(gram: GramianData, alpha: float, defect: np.ndarray) -> float:
    """Energy norm of the unreachable remainder, alpha * |(alpha I + Q)^{-1} h|."""
    return float(alpha * np.linalg.norm(gram.solve_regularized(alpha, defect)))


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise control: a base law up to the window, a steering tail inside it.

    The tail is u(t) = aux(t) + B* T(tau - t)* x_hat; ``x_hat`` is the
    regularized solve output and ``aux`` an optional auxiliary law added on
    top (zero when absent).  ``value`` is right-continuous at the seam
    tau - delta; ``value_left`` gives the limit from the left, which
    integrators need so each step sees a smooth forcing on its closed step
    interval.
    """

    semigroup: Semigroup
    overlap: OverlapMatrix
    window: SteeringWindow
    base: Optional[Callable[[float], np.ndarray]] = None
    x_hat: Optional[np.ndarray] = None
    aux: Optional[Callable[[float], np.ndarray]] = None
    alpha: Optional[float] = None
    defect: Optional[np.ndarray] = None

    @property
    def has_tail(self) -> bool:
        return self.x_hat is not None or self.aux is not None

    def _base_value(self, t: float) -> np.ndarray:
        if self.base is None:
            return np.zeros(self.overlap.n)
        return np.asarray(self.base(t), dtype=float)

    def _tail_value(self, t: float) -> np.ndarray:
        out = np.zeros(self.overlap.n)
        if self.aux is not None:
            out += np.asarray(self.aux(t), dtype=float)
        if self.x_hat is not None:
            out += adjoint_control_at(
                self.semigroup, self.overlap, self.window, self.x_hat, t
            )
        return out

    def value(self, t: float) -> np.ndarray:
        """Control at time t, right-continuous at the window seam."""
        if not self.has_tail or t < self.window.start - self.window.edge_tol:
            return self._base_value(t)
        return self._tail_value(t)

    def value_left(self, t: float) -> np.ndarray:
        """Left limit at time t (differs from ``value`` only at the seam)."""
        if not self.has_tail or t <= self.window.start + self.window.edge_tol:
            return self._base_value(t)
        return self._tail_value(t)


def synthesize_tail(
    gram: GramianData,
    semigroup: Semigroup,
    overlap: OverlapMatrix,
    alpha: float,
    handoff: ModalState,
    target: ModalState,
    base: Optional[Callable[[float], np.ndarray]] = None,
    aux: Optional[Callable[[float], np.ndarray]] = None,
) -> ControlSignal:
    """Regularized steering control closing the defect left by the free flight.

    The defect is h = target - T(delta) handoff, where handoff is the
    trajectory state at tau - delta.  With an auxiliary law the solve runs
    against h - G aux and the tail adds aux back, so the residual identity
    keeps its shape.
    """
    basis = semigroup.basis
    flown = semigroup.apply(gram.window.width, handoff)
    defect = energy_vector(target, basis) - energy_vector(flown, basis)
    rhs = defect
    if aux is not None:
        aux_nodes = np.stack([np.asarray(aux(s), dtype=float) for s in gram.nodes])
        rhs = defect - gram.apply_control(aux_nodes)
    x_hat = gram.solve_regularized(alpha, rhs)
    return ControlSignal(
        semigroup=semigroup,
        overlap=overlap,
        window=gram.window,
        base=base,
        x_hat=x_hat,
        aux=aux,
        alpha=alpha,
        defect=defect,
    )
