"""Closed-form semigroup for the damped modal blocks.

Each mode j contributes the 2x2 generator block

    R_j = [[0, 1], [-gamma*lam_j, -eta*sqrt(lam_j)]]

and the semigroup acts blockwise as exp(R_j t).  With beta_j =
eta*sqrt(lam_j)/2 the exponential has one closed form per damping regime,
decided by the sign of eta^2 - 4*gamma (the same sign for every mode):

    underdamped   exp(-beta t)[cos(om t) I + sin(om t)/om (R + beta I)]
    critical      exp(-beta t)[I + t (R + beta I)]
    overdamped    exp(-beta t)[cosh(nu t) I + sinh(nu t)/nu (R + beta I)]

with om = sqrt(gamma*lam - beta^2), nu = sqrt(beta^2 - gamma*lam).  The
overdamped form switches to the equivalent pair p = exp(-(beta - nu)t),
q = exp(-(beta + nu)t) once nu*t is large, which avoids evaluating a huge
cosh against a tiny exponential.  t = 0 returns the identity bitwise.

The adjoint is taken in the energy inner product
sum_j lam_j w_j w'_j + v_j v'_j, under which the block adjoint is
W^{-1} E^T W with W = diag(lam_j, 1).
"""

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralBasis
from .state import ModalState

#: |eta^2 - 4 gamma| below this is treated as critically damped.
CRITICAL_THRESHOLD = 1e-9


def _sinc(x: np.ndarray) -> np.ndarray:
    """sin(x)/x with the removable singularity filled in."""
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = np.sin(x[nz]) / x[nz]
    return out


def _sinhc(x: np.ndarray) -> np.ndarray:
    """sinh(x)/x with the removable singularity filled in."""
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = np.sinh(x[nz]) / x[nz]
    return out


@dataclass(frozen=True)
class Semigroup:
    """Blockwise modal semigroup for damping eta and stiffness gamma."""

    basis: SpectralBasis
    eta: float
    gamma: float

    def __post_init__(self):
        if self.eta <= 0 or self.gamma <= 0:
            raise ValueError(
                f"eta and gamma must be positive, got eta={self.eta}, gamma={self.gamma}"
            )

    @property
    def discriminant(self) -> float:
        return self.eta**2 - 4.0 * self.gamma

    @property
    def regime(self) -> str:
        d = self.discriminant
        if abs(d) < CRITICAL_THRESHOLD:
            return "critical"
        return "overdamped" if d > 0 else "underdamped"

    @property
    def _beta(self) -> np.ndarray:
        return 0.5 * self.eta * self.basis.sqrt_eigenvalues

    def block_matrices(self) -> np.ndarray:
        """Generator blocks R_j, shape (n_modes, 2, 2)."""
        lam = self.basis.eigenvalues
        blocks = np.zeros((self.basis.n_modes, 2, 2))
        blocks[:, 0, 1] = 1.0
        blocks[:, 1, 0] = -self.gamma * lam
        blocks[:, 1, 1] = -self.eta * self.basis.sqrt_eigenvalues
        return blocks

    def block_eigenvalues(self) -> np.ndarray:
        """Eigenvalue pairs of each block, shape (n_modes, 2), complex."""
        lam = self.basis.eigenvalues
        beta = self._beta
        disc = beta**2 - self.gamma * lam
        root = np.sqrt(disc.astype(complex))
        return np.stack([-beta + root, -beta - root], axis=1)

    def spectral_abscissa(self) -> float:
        """max_j max Re(mu) over the block eigenvalues (negative here)."""
        return float(np.max(self.block_eigenvalues().real))

    def block_exp(self, t: float) -> np.ndarray:
        """exp(R_j t) for every mode, shape (n_modes, 2, 2)."""
        if t < 0:
            raise ValueError(f"the semigroup is only defined for t >= 0, got t={t}")
        n = self.basis.n_modes
        if t == 0.0:
            return np.broadcast_to(np.eye(2), (n, 2, 2)).copy()

        lam = self.basis.eigenvalues
        beta = self._beta
        decay = np.exp(-beta * t)

        # a, b are the coefficients in exp(R t) = a*I + b*(R + beta*I).
        regime = self.regime
        if regime == "underdamped":
            om = np.sqrt(self.gamma * lam - beta**2)
            a = decay * np.cos(om * t)
            b = decay * t * _sinc(om * t)
        elif regime == "critical":
            a = decay
            b = decay * t
        else:
            nu = np.sqrt(beta**2 - self.gamma * lam)
            a = np.empty(n)
            b = np.empty(n)
            small = nu * t < 30.0
            a[small] = decay[small] * np.cosh(nu[small] * t)
            b[small] = decay[small] * t * _sinhc(nu[small] * t)
            big = ~small
            # p,q split: cosh/sinh would overflow long before the product does.
            p = np.exp(-(beta[big] - nu[big]) * t)
            q = np.exp(-(beta[big] + nu[big]) * t)
            a[big] = 0.5 * (p + q)
            b[big] = 0.5 * (p - q) / nu[big]

        out = np.empty((n, 2, 2))
        out[:, 0, 0] = a + b * beta
        out[:, 0, 1] = b
        out[:, 1, 0] = -b * self.gamma * lam
        out[:, 1, 1] = a - b * beta
        return out

    def adjoint_block_exp(self, t: float) -> np.ndarray:
        """Blocks of the adjoint semigroup in the energy inner product.

        Per mode: W^{-1} E^T W with W = diag(lam_j, 1), i.e. the (0,1) and
        (1,0) entries of E trade places with weights 1/lam_j and lam_j.
        """
        blocks = self.block_exp(t)
        lam = self.basis.eigenvalues
        out = np.empty_like(blocks)
        out[:, 0, 0] = blocks[:, 0, 0]
        out[:, 0, 1] = blocks[:, 1, 0] / lam
        out[:, 1, 0] = blocks[:, 0, 1] * lam
        out[:, 1, 1] = blocks[:, 1, 1]
        return out

    def energy_block_exp(self, t: float) -> np.ndarray:
        """Blocks conjugated into energy coordinates (sqrt(lam) w, v).

        In these coordinates the energy norm is Euclidean and the adjoint
        blocks are plain transposes.
        """
        blocks = self.block_exp(t)
        s = self.basis.sqrt_eigenvalues
        out = np.empty_like(blocks)
        out[:, 0, 0] = blocks[:, 0, 0]
        out[:, 0, 1] = blocks[:, 0, 1] * s
        out[:, 1, 0] = blocks[:, 1, 0] / s
        out[:, 1, 1] = blocks[:, 1, 1]
        return out

    def apply(self, t: float, state: ModalState) -> ModalState:
        """T(t) applied to a modal state."""
        blocks = self.block_exp(t)
        return self._apply_blocks(blocks, state)

    def apply_adjoint(self, t: float, state: ModalState) -> ModalState:
        """T(t)* (energy inner product) applied to a modal state."""
        blocks = self.adjoint_block_exp(t)
        return self._apply_blocks(blocks, state)

    def _apply_blocks(self, blocks: np.ndarray, state: ModalState) -> ModalState:
        if state.n != self.basis.n_modes:
            raise ValueError(
                f"state has {state.n} modes, semigroup is built for {self.basis.n_modes}"
            )
        w = blocks[:, 0, 0] * state.w + blocks[:, 0, 1] * state.v
        v = blocks[:, 1, 0] * state.w + blocks[:, 1, 1] * state.v
        return ModalState(w, v)

    def operator_norm(self, t: float) -> float:
        """Energy-norm operator norm of T(t): the largest block singular value."""
        blocks = self.energy_block_exp(t)
        frob2 = np.sum(blocks**2, axis=(1, 2))
        det = blocks[:, 0, 0] * blocks[:, 1, 1] - blocks[:, 0, 1] * blocks[:, 1, 0]
        gap = np.sqrt(np.maximum(frob2**2 - 4.0 * det**2, 0.0))
        sigma_max2 = 0.5 * (frob2 + gap)
        return float(np.sqrt(np.max(sigma_max2)))

    def decay_envelope(self, t_max: float, n_samples: int = 400) -> tuple:
        """Fit (M, rho) with operator_norm(t) <= M exp(-rho t) on [0, t_max].

        rho is 95% of the spectral decay rate, which leaves room for the
        polynomial factor of defective (critical) blocks; M is the smallest
        constant that works on a dense sample of [0, t_max], padded by 0.1%
        to cover the wiggle between sample points.
        """
        if t_max <= 0:
            raise ValueError(f"t_max must be positive, got {t_max}")
        rho = -0.95 * self.spectral_abscissa()
        times = np.linspace(0.0, t_max, n_samples)
        m = max(self.operator_norm(t) * np.exp(rho * t) for t in times)
        return float(1.001 * m), float(rho)
