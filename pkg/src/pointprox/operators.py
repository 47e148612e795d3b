"""Sensor-grid forward operator, its pre-adjoint, and the smoothing pairing.

The measurement model: each sensor at grid point z integrates a spread
point-source field over its box-shaped field of view, so a discrete measure
mu = sum_i w_i delta_{x_i} produces readings

    [A mu]_z = sum_i w_i K(x_i - z),    K = box_b * psi  (per axis),

with K available in closed form (see kernels).  The pre-adjoint maps a sensor
vector y to the continuous function A_* y = sum_z y_z K(. - z), returned here
as a boundable kernel sum ready for branch-and-bound.

Smoothing: a symmetric positive-definite kernel rho turns discrete measures
into continuous fields D mu = rho * mu and induces the semi-inner product
<mu, nu>_D = sum_ij w_i v_j rho(x_i - y_j) used as the proximal penalty.

``estimate_smoothness`` returns L with A_* A <= L D as quadratic forms.  The
per-axis constant is derived in Fourier space: with phi = psi * mu,

    ||A mu||^2 <= 2b \int |phi|^2 = 2b \int |psi^|^2 |mu^|^2,

(Cauchy-Schwarz over disjoint sensor boxes), and |psi^|^2 <= L1 rho^ pointwise
gives ||A mu||^2 <= 2b L1 <mu, mu>_D.  For the fast pairing rho = psi and
psi^ = sinc^4 in [0, 1], so L1 = 1.  For the cut-Gaussian/triangular-Gaussian
pairing, writing u, v for the uncut Gaussian factors and chi for the cut
indicator, psi^ = u^ * chi^ and rho^ = v^ * chi^2; Cauchy-Schwarz with weight
v^ yields

    |psi^|^2 <= (\int u^2 / v^) rho^,   L1 = C_u^2 s_u^2 / (C_v s_v sqrt(2 s_u^2 - s_v^2)),

finite for s_u <= s_v < sqrt(2) s_u.  Note L1 depends on the kernel scaling:
for C_u = C_v = sqrt(2 pi) s_v and s_u = s_v this is exactly sqrt(2 pi) s_v.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bisection import KernelSum
from .geometry import Cube, DiscreteMeasure
from .kernels import (
    ConvolvedSensorKernel,
    CutGaussian1D,
    FastSpread1D,
    Kernel1D,
    ProductKernel,
    TriangularGaussian1D,
    axis_profiles,
)

__all__ = [
    "SensorGrid",
    "SensorGridOperator",
    "ParticleToWave",
    "SmoothnessConstants",
    "apply_forward",
    "apply_preadjoint",
    "d_inner",
    "estimate_smoothness",
]


@dataclass(frozen=True)
class SensorGrid:
    """Regular lattice of box sensors covering an axis-aligned domain.

    ``shape`` gives sensors per axis; sensor centres sit at cell midpoints of
    the uniform partition of the domain, and each sensor integrates over a box
    of halfwidth ``halfwidth`` around its centre.
    """

    domain: Cube
    shape: tuple[int, ...]
    halfwidth: float

    def __post_init__(self):
        if len(self.shape) != self.domain.dim:
            raise ValueError("need one sensor count per axis")
        if any(n < 1 for n in self.shape):
            raise ValueError("sensor counts must be >= 1")
        if self.halfwidth <= 0:
            raise ValueError("sensor halfwidth must be positive")
        if self.halfwidth >= np.min(self.spacing):
            raise ValueError("sensor halfwidth must be below the grid spacing")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        return self.domain.widths / np.array(self.shape, dtype=float)

    @property
    def positions(self) -> np.ndarray:
        """Sensor centres, shape (count, dim), in C order over the axes."""
        axes = [
            self.domain.lower[j] + (np.arange(n) + 0.5) * self.spacing[j]
            for j, n in enumerate(self.shape)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


class ParticleToWave:
    """Convolution mu -> rho * mu with a symmetric positive-definite kernel."""

    def __init__(self, kernel, dim: int | None = None):
        if isinstance(kernel, ProductKernel):
            dim = kernel.dim if dim is None else dim
        elif dim is None:
            dim = 1
        self.dim = dim
        self.factors = axis_profiles(kernel, dim)
        self.kernel = kernel if dim > 1 else self.factors[0]

    @property
    def peak(self) -> float:
        """rho(0), the diagonal of every Gram matrix."""
        return float(np.prod([f.peak for f in self.factors]))

    def gram(self, locations_a: np.ndarray, locations_b: np.ndarray | None = None) -> np.ndarray:
        """Matrix of rho(a_i - b_j) over two location lists."""
        a = np.atleast_2d(np.asarray(locations_a, dtype=float))
        b = a if locations_b is None else np.atleast_2d(np.asarray(locations_b, dtype=float))
        diff = a[:, None, :] - b[None, :, :]
        out = self.factors[0](diff[..., 0])
        for j in range(1, self.dim):
            out = out * self.factors[j](diff[..., j])
        return out

    def field(self, mu: DiscreteMeasure) -> KernelSum:
        """The function D mu as a boundable kernel sum."""
        f = KernelSum(self.dim)
        if len(mu):
            f.add_term_group(self.kernel, mu.locations, mu.weights)
        return f

    def inner(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        if len(mu) == 0 or len(nu) == 0:
            return 0.0
        g = self.gram(mu.locations, nu.locations)
        return float(mu.weights @ g @ nu.weights)

    def norm_sq(self, mu: DiscreteMeasure) -> float:
        return self.inner(mu, mu)


class SensorGridOperator:
    """Forward map A over a sensor grid, with its pre-adjoint."""

    def __init__(self, grid: SensorGrid, spread, smoothing: ParticleToWave):
        self.grid = grid
        self.spread_factors = axis_profiles(spread, grid.dim)
        if smoothing.dim != grid.dim:
            raise ValueError("smoothing dimension mismatch")
        self.smoothing = smoothing
        factors = tuple(
            ConvolvedSensorKernel(f, grid.halfwidth) for f in self.spread_factors
        )
        self.conv_factors = factors
        self.conv_kernel = factors[0] if grid.dim == 1 else ProductKernel(factors)
        self._positions = grid.positions

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    def design_matrix(self, locations) -> np.ndarray:
        """K(x_i - z) for every sensor z (rows) and location x_i (columns)."""
        x = np.atleast_2d(np.asarray(locations, dtype=float))
        diff = x[None, :, :] - self._positions[:, None, :]
        out = self.conv_factors[0](diff[..., 0])
        for j in range(1, self.dim):
            out = out * self.conv_factors[j](diff[..., j])
        return out

    def apply(self, mu: DiscreteMeasure) -> np.ndarray:
        if len(mu) == 0:
            return np.zeros(self.grid.count)
        return self.design_matrix(mu.locations) @ mu.weights

    def preadjoint(self, y: np.ndarray) -> KernelSum:
        """A_* y = sum_z y_z K(. - z) as a boundable kernel sum."""
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != self.grid.count:
            raise ValueError("sensor vector length mismatch")
        f = KernelSum(self.dim)
        f.add_term_group(self.conv_kernel, self._positions, y)
        return f

    def preadjoint_at(self, y: np.ndarray, locations) -> np.ndarray:
        """Evaluate A_* y at the given locations."""
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != self.grid.count:
            raise ValueError("sensor vector length mismatch")
        return self.design_matrix(locations).T @ y

    def estimate_smoothness(self) -> "SmoothnessConstants":
        return estimate_smoothness(
            self.spread_factors[0],
            self.smoothing.factors[0],
            self.grid.halfwidth,
            self.dim,
        )


@dataclass(frozen=True)
class SmoothnessConstants:
    """Constants with A_* A <= L0 L1 D; L = L0 * L1 aggregates all axes."""

    L0: float
    L1: float
    L: float


def estimate_smoothness(spread, pairing, b: float, d: int = 1) -> SmoothnessConstants:
    """Dominance constant L with ||A mu||^2 <= L <mu, mu>_D.

    Supports the two shipped pairings: fast spread with itself (L1 = 1) and
    cut Gaussian with the triangular-Gaussian kernel.  For the latter the
    estimate requires s_u <= s_v < sqrt(2) s_u (see module docstring); outside
    that range no finite constant is produced and a ValueError is raised.
    """
    if b <= 0:
        raise ValueError("sensor halfwidth must be positive")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if isinstance(spread, FastSpread1D) and isinstance(pairing, FastSpread1D):
        if not math.isclose(spread.sigma, pairing.sigma):
            raise ValueError("fast pairing requires matching spread and kernel widths")
        l1_axis = 1.0
    elif isinstance(spread, CutGaussian1D) and isinstance(pairing, TriangularGaussian1D):
        if not math.isclose(spread.a, pairing.a):
            raise ValueError("pairing kernel must use the same cut halfwidth a")
        su, sv = spread.sigma, pairing.sigma
        if sv < su * (1.0 - 1e-12):
            raise ValueError("bound invalid for sigma_v < sigma_u")
        if sv * sv >= 2.0 * su * su:
            raise ValueError("bound invalid for sigma_v >= sqrt(2) sigma_u")
        l1_axis = (
            spread.scale**2
            * su**2
            / (pairing.scale * sv * math.sqrt(2.0 * su * su - sv * sv))
        )
    else:
        raise TypeError("unsupported spread/kernel pairing")
    l0 = (2.0 * b) ** d
    l1 = l1_axis**d
    return SmoothnessConstants(L0=l0, L1=l1, L=l0 * l1)


def apply_forward(op: SensorGridOperator, mu: DiscreteMeasure) -> np.ndarray:
    return op.apply(mu)


def apply_preadjoint(op: SensorGridOperator, y: np.ndarray) -> KernelSum:
    return op.preadjoint(y)


def d_inner(smoothing: ParticleToWave, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return smoothing.inner(mu, nu)
