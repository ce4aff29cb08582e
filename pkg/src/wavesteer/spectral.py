"""Dirichlet eigenbasis on an interval, actuator overlap, and modal transforms.

The basis diagonalizes -d^2/dx^2 on (0, L) with zero boundary values:
eigenvalues lam_j = (j*pi/L)^2 and eigenfunctions phi_j(x) =
sqrt(2/L)*sin(j*pi*x/L), orthonormal in L^2(0, L).  The actuator overlap
matrix is the modal realization of multiplication by the indicator of a
subinterval (a, b); it is evaluated in closed form so it is bit-reproducible.
Field transforms use the uniform interior collocation grid, on which the
discrete sine orthogonality makes analyze(synthesize(c)) exact for the
first N modes.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DomainSpec:
    """Interval (0, length) with a collocation resolution for pointwise work.

    ``grid_points`` counts interior collocation nodes; it must stay at or
    above 4x the basis truncation to leave anti-aliasing margin for the
    pointwise nonlinearities.
    """

    length: float = float(np.pi)
    grid_points: int = 128

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        if self.grid_points < 4:
            raise ValueError(f"grid_points must be >= 4, got {self.grid_points}")


@dataclass(frozen=True)
class ActuatorRegion:
    """Subinterval (a, b) of (0, L) on which the control acts."""

    a: float
    b: float

    def __post_init__(self):
        if not 0 <= self.a < self.b:
            raise ValueError(f"actuator needs 0 <= a < b, got a={self.a}, b={self.b}")

    def validate_in(self, domain: DomainSpec):
        if self.b > domain.length + 1e-12:
            raise ValueError(
                f"actuator (a, b)=({self.a}, {self.b}) exceeds domain length "
                f"{domain.length}"
            )


@dataclass(frozen=True)
class SpectralBasis:
    """First N Dirichlet eigenpairs on (0, L).

    ``eigenvalues[j-1] = (j*pi/L)^2``, strictly increasing; the eigenfunctions
    sqrt(2/L)*sin(j*pi*x/L) carry normalization ``scale = sqrt(2/L)``.
    """

    n_modes: int
    length: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def scale(self) -> float:
        return float(np.sqrt(2.0 / self.length))

    @property
    def sqrt_eigenvalues(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    def eigenfunctions_at(self, x: np.ndarray) -> np.ndarray:
        """Matrix phi[i, j] = phi_{j+1}(x_i) for sample points x."""
        x = np.asarray(x, dtype=float)
        j = np.arange(1, self.n_modes + 1)
        return self.scale * np.sin(np.outer(x, j) * (np.pi / self.length))


def build_basis(domain: DomainSpec, n_modes: int) -> SpectralBasis:
    """Construct the Dirichlet eigenbasis of -Laplacian on (0, length).

    Parameters
    ----------
    domain : DomainSpec
        Interval and collocation resolution.
    n_modes : int
        Truncation order N; must be >= 1.
    """
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    j = np.arange(1, n_modes + 1, dtype=float)
    eigenvalues = (j * np.pi / domain.length) ** 2
    return SpectralBasis(n_modes=n_modes, length=domain.length, eigenvalues=eigenvalues)


@dataclass(frozen=True)
class OverlapMatrix:
    """Symmetric matrix O with O_ij = <1_(a,b) phi_i, phi_j>_{L^2(0,L)}."""

    matrix: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"expected control vector of length {self.n}, got {u.shape}")
        return self.matrix @ u


def overlap_matrix(basis: SpectralBasis, region: ActuatorRegion) -> OverlapMatrix:
    """Closed-form actuator overlap matrix for the region (a, b).

    Uses the product-to-sum identities, so entries are exact up to roundoff;
    the full-domain region yields the identity matrix exactly.
    """
    L = basis.length
    n = basis.n_modes
    a, b = region.a, min(region.b, L)
    j = np.arange(1, n + 1, dtype=float)

    def s(k, x):
        # antiderivative helper: sin(k*pi*x/L)/(k*pi/L) evaluated without the 1/k
        # singularity (k != 0 on all call sites)
        return np.sin(k * np.pi * x / L) / (k * np.pi)

    jp = j[:, None] + j[None, :]
    jm = j[:, None] - j[None, :]
    off = np.zeros((n, n))
    mask = jm != 0
    # (2/L) * int sin(i pi x/L) sin(j pi x/L) dx over (a, b), i != j
    off[mask] = (s(jm[mask], b) - s(jm[mask], a)) - (s(jp[mask], b) - s(jp[mask], a))
    diag = (b - a) / L - (s(2 * j, b) - s(2 * j, a))
    out = off
    np.fill_diagonal(out, diag)
    out = 0.5 * (out + out.T)
    return OverlapMatrix(matrix=out)


def collocation_grid(domain: DomainSpec) -> np.ndarray:
    """Uniform interior nodes x_i = i*L/(P+1), i = 1..P."""
    P = domain.grid_points
    return domain.length * np.arange(1, P + 1) / (P + 1)


def synthesis_matrix(basis: SpectralBasis, domain: DomainSpec) -> np.ndarray:
    return basis.eigenfunctions_at(collocation_grid(domain))


def synthesize_field(basis: SpectralBasis, domain: DomainSpec, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate the modal expansion on the collocation grid."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.n_modes,):
        raise ValueError(
            f"expected {basis.n_modes} coefficients, got shape {coeffs.shape}"
        )
    return synthesis_matrix(basis, domain) @ coeffs


def analyze_field(basis: SpectralBasis, domain: DomainSpec, samples: np.ndarray) -> np.ndarray:
    """Project grid samples onto the first N modes by discrete sine quadrature.

    On the interior grid the discrete sine orthogonality is exact, so this is
    a two-sided inverse of :func:`synthesize_field` for band-limited fields.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (domain.grid_points,):
        raise ValueError(
            f"expected {domain.grid_points} samples, got shape {samples.shape}"
        )
    weight = domain.length / (domain.grid_points + 1)
    return weight * (synthesis_matrix(basis, domain).T @ samples)
