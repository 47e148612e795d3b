"""Compactly supported convolution kernels and their closed forms.

Every kernel in this module is a non-negative, even function of one variable
that is non-increasing in |t| (radially non-increasing).  That property makes
exact interval bounds trivial: on [lo, hi] the maximum sits at the point of
smallest |t| and the minimum at an endpoint of largest |t|.  The bisection
search relies on those bounds, so any new kernel family added here must keep
the property.

Families:

* ``HatFunction(b)``          tri_b(t) = max(0, 1 - |t|/b).
* ``FastSpread1D(sigma)``     the autoconvolution of the unit hat tri_{1/2},
  rescaled to integrate to one over [-sigma, sigma]; piecewise cubic with
  Fourier transform sinc(pi sigma xi / 2)^4 (unnormalised sinc t = sin t / t).
* ``CutGaussian1D(sigma, a, scale)``   scale * exp(-t^2 / (2 sigma^2)) cut to
  [-a, a]; discontinuous at the cut.
* ``TriangularGaussian1D(sigma, a, scale)``  max(0, 2a - |t|) times the same
  Gaussian profile, supported on [-2a, 2a].  Arises as the natural pairing
  partner of the cut Gaussian: the triangular factor is the autocorrelation
  of the cut indicator.
* ``ConvolvedSensorKernel(spread, b)``  box indicator of halfwidth b
  convolved with a spread kernel; closed forms via the error function for
  the cut Gaussian and via an explicit piecewise-quartic antiderivative for
  the fast spread.
* ``ProductKernel(factors)``  separable product for multi-dimensional use.

``unit_mass_scale(sigma)`` gives 1 / (sqrt(2 pi) sigma), the scale for which
the uncut Gaussian has unit integral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from .geometry import Cube

__all__ = [
    "Kernel1D",
    "HatFunction",
    "FastSpread1D",
    "CutGaussian1D",
    "TriangularGaussian1D",
    "ConvolvedSensorKernel",
    "ProductKernel",
    "unit_mass_scale",
    "bounds_on_cube",
    "lipschitz_constant",
    "axis_profiles",
]

_SQRT2 = math.sqrt(2.0)
_NO_KINKS: tuple[np.ndarray, float] = (np.empty(0), 0.0)


def unit_mass_scale(sigma: float) -> float:
    """Scale making the (uncut) Gaussian of deviation sigma integrate to 1."""
    return 1.0 / (math.sqrt(2.0 * math.pi) * sigma)


class Kernel1D:
    """Base class: even, non-negative, radially non-increasing profile.

    Subclasses implement ``_eval`` on arrays and expose ``radius`` (support
    halfwidth), ``lipschitz`` (an upper bound on sup |k'|), and derivative
    evaluations used by the local quadratic models of the bisection search.
    """

    radius: float

    def __call__(self, t):
        return self._eval(np.asarray(t, dtype=float))

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    def deriv2(self, t):
        raise NotImplementedError

    def deriv12(self, t):
        """(k'(t), k''(t)) in one call; subclasses fuse shared subexpressions."""
        return self.deriv(t), self.deriv2(t)

    @property
    def curvature(self) -> float:
        """Certified bound on |k''| away from kinks; ``inf`` disables the
        second-order box bounds of the bisection search for this profile."""
        return math.inf

    @property
    def convex_kinks(self) -> tuple[np.ndarray, float]:
        """(offsets, jump bound) of upward jumps of k' not covered by
        ``curvature``; offsets are relative to the profile center."""
        return _NO_KINKS

    @property
    def concave_kinks(self) -> tuple[np.ndarray, float]:
        """Downward jumps of k'; they matter when the profile enters a sum
        with a negative weight."""
        return _NO_KINKS

    @property
    def peak(self) -> float:
        return float(self(0.0))

    @property
    def lipschitz(self) -> float:
        raise NotImplementedError

    def interval_bounds(self, lo, hi):
        """Exact (min, max) of the profile over each interval [lo_i, hi_i].

        Valid for even profiles that are non-increasing in |t|: the max is
        attained at the point of the interval closest to 0, the min at the
        endpoint farthest from 0.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        near = np.where(lo > 0.0, lo, np.where(hi < 0.0, hi, 0.0))
        far = np.where(np.abs(lo) >= np.abs(hi), lo, hi)
        return self._eval(far), self._eval(near)

    def bounds(self, cube: Cube) -> tuple[float, float]:
        if cube.dim != 1:
            raise ValueError("1D kernel queried with a cube of dim != 1")
        lb, ub = self.interval_bounds(cube.lower, cube.upper)
        return float(lb[0]), float(ub[0])

    def local_model(self, cube: Cube) -> tuple[float, float, float]:
        """(value, derivative, second derivative) at the cube midpoint."""
        m = cube.midpoint
        return float(self(m)[0]), float(self.deriv(m)[0]), float(self.deriv2(m)[0])


@dataclass(frozen=True)
class HatFunction(Kernel1D):
    """tri_b(t) = max(0, 1 - |t|/b)."""

    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("halfwidth b must be positive")

    @property
    def radius(self) -> float:
        return self.b

    def _eval(self, t):
        return np.maximum(0.0, 1.0 - np.abs(t) / self.b)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) < self.b
        return np.where(inside, -np.sign(t) / self.b, 0.0)

    def deriv2(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    @property
    def curvature(self) -> float:
        return 0.0

    @property
    def convex_kinks(self) -> tuple[np.ndarray, float]:
        return np.array([-self.b, self.b]), 1.0 / self.b

    @property
    def concave_kinks(self) -> tuple[np.ndarray, float]:
        return np.array([0.0]), 2.0 / self.b

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.b


def _fast_profile(y: np.ndarray) -> np.ndarray:
    # Autoconvolution of tri_{1/2}; supported on (-1, 1), peak 1/3 at 0.
    ay = np.abs(y)
    inner = 2.0 * ay**3 - 2.0 * y * y + 1.0 / 3.0
    outer = (2.0 / 3.0) * (1.0 - ay) ** 3
    return np.where(ay >= 1.0, 0.0, np.where(ay <= 0.5, inner, outer))


def _fast_profile_d1(y: np.ndarray) -> np.ndarray:
    ay = np.abs(y)
    s = np.sign(y)
    inner = 6.0 * y * ay - 4.0 * y
    outer = -2.0 * s * (1.0 - ay) ** 2
    return np.where(ay >= 1.0, 0.0, np.where(ay <= 0.5, inner, outer))


def _fast_profile_d2(y: np.ndarray) -> np.ndarray:
    ay = np.abs(y)
    inner = 12.0 * ay - 4.0
    outer = 4.0 * (1.0 - ay)
    return np.where(ay >= 1.0, 0.0, np.where(ay <= 0.5, inner, outer))


def _fast_profile_antideriv(y: np.ndarray) -> np.ndarray:
    # G(y) = int_{-1}^{y} of the profile; G(1) = 1/4.
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    out[y <= -1.0] = 0.0
    out[y >= 1.0] = 0.25
    m = (y > -1.0) & (y <= -0.5)
    out[m] = (1.0 / 6.0) * (y[m] + 1.0) ** 4
    m = (y > -0.5) & (y <= 0.5)
    ym = y[m]
    out[m] = 0.5 * ym**3 * np.abs(ym) - (2.0 / 3.0) * ym**3 + ym / 3.0 + 0.125
    m = (y > 0.5) & (y < 1.0)
    out[m] = 0.25 - (1.0 / 6.0) * (y[m] - 1.0) ** 4
    return out


@dataclass(frozen=True)
class FastSpread1D(Kernel1D):
    """Piecewise-cubic spread of unit mass supported on [-sigma, sigma].

    psi(t) = (4 / sigma) * q(t / sigma) where q is the autoconvolution of the
    unit hat tri_{1/2}.  Peak value 4 / (3 sigma); Fourier transform
    sinc(pi sigma xi / 2)^4, so psi is positive definite and can serve as its
    own pairing kernel.
    """

    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def radius(self) -> float:
        return self.sigma

    def _eval(self, t):
        return (4.0 / self.sigma) * _fast_profile(t / self.sigma)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return (4.0 / self.sigma**2) * _fast_profile_d1(t / self.sigma)

    def deriv2(self, t):
        t = np.asarray(t, dtype=float)
        return (4.0 / self.sigma**3) * _fast_profile_d2(t / self.sigma)

    @property
    def lipschitz(self) -> float:
        # sup |q'| = 2/3 at y = +-1/3
        return 8.0 / (3.0 * self.sigma**2)

    @property
    def curvature(self) -> float:
        # sup |q''| = 4 at y = 0; the profile is C^1, so no kink terms
        return 16.0 / self.sigma**3

    def integral(self) -> float:
        return 1.0


@dataclass(frozen=True)
class CutGaussian1D(Kernel1D):
    """Gaussian profile of deviation sigma cut to [-a, a].

    The jump at the cut is harmless for evaluation and interval bounds but
    means the profile is only Lipschitz in the interior; ``lipschitz`` bounds
    the interior derivative.
    """

    sigma: float
    a: float
    scale: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0 or self.a <= 0:
            raise ValueError("sigma and a must be positive")

    @property
    def radius(self) -> float:
        return self.a

    def _eval(self, t):
        v = self.scale * np.exp(-t * t / (2.0 * self.sigma**2))
        return np.where(np.abs(t) <= self.a, v, 0.0)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        v = -self.scale * t / self.sigma**2 * np.exp(-t * t / (2.0 * self.sigma**2))
        return np.where(np.abs(t) <= self.a, v, 0.0)

    def deriv2(self, t):
        t = np.asarray(t, dtype=float)
        s2 = self.sigma**2
        v = self.scale * (t * t / s2 - 1.0) / s2 * np.exp(-t * t / (2.0 * s2))
        return np.where(np.abs(t) <= self.a, v, 0.0)

    def deriv12(self, t):
        t = np.asarray(t, dtype=float)
        s2 = self.sigma**2
        g = np.where(np.abs(t) <= self.a, self.scale * np.exp(-t * t / (2.0 * s2)), 0.0)
        return -t / s2 * g, (t * t / s2 - 1.0) / s2 * g

    @property
    def lipschitz(self) -> float:
        m = min(self.sigma, self.a)
        return self.scale * m / self.sigma**2 * math.exp(-m * m / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class TriangularGaussian1D(Kernel1D):
    """max(0, 2a - |t|) times a Gaussian profile; support [-2a, 2a].

    This is the autocorrelation of the indicator of [-a, a] multiplied by a
    Gaussian of deviation sigma, the kernel paired with ``CutGaussian1D``.
    Positive definite whenever the Gaussian is, since its Fourier transform
    is the convolution of a squared sinc with the Gaussian transform.
    """

    sigma: float
    a: float
    scale: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0 or self.a <= 0:
            raise ValueError("sigma and a must be positive")

    @property
    def radius(self) -> float:
        return 2.0 * self.a

    def _eval(self, t):
        tri = np.maximum(0.0, 2.0 * self.a - np.abs(t))
        return self.scale * tri * np.exp(-t * t / (2.0 * self.sigma**2))

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        s2 = self.sigma**2
        g = np.exp(-t * t / (2.0 * s2))
        inside = np.abs(t) < 2.0 * self.a
        tri = 2.0 * self.a - np.abs(t)
        v = self.scale * g * (-np.sign(t) - tri * t / s2)
        return np.where(inside, v, 0.0)

    def deriv2(self, t):
        t = np.asarray(t, dtype=float)
        s2 = self.sigma**2
        g = np.exp(-t * t / (2.0 * s2))
        inside = np.abs(t) < 2.0 * self.a
        tri = 2.0 * self.a - np.abs(t)
        v = self.scale * g * (2.0 * np.sign(t) * t / s2 + tri * (t * t / s2 - 1.0) / s2)
        return np.where(inside, v, 0.0)

    def deriv12(self, t):
        t = np.asarray(t, dtype=float)
        s2 = self.sigma**2
        g = np.where(np.abs(t) < 2.0 * self.a, self.scale * np.exp(-t * t / (2.0 * s2)), 0.0)
        tri = 2.0 * self.a - np.abs(t)
        sg = np.sign(t)
        d1 = g * (-sg - tri * t / s2)
        d2 = g * (2.0 * sg * t / s2 + tri * (t * t / s2 - 1.0) / s2)
        return d1, d2

    @property
    def lipschitz(self) -> float:
        # |rho'| <= scale * exp(-t^2/2s^2) (1 + tri(t)|t|/s^2) <= scale (1 + a^2/s^2)
        return self.scale * (1.0 + self.a**2 / self.sigma**2)

    @property
    def curvature(self) -> float:
        # |rho''| <= scale (2|t|g/s^2 + tri g |t^2/s^2 - 1| / s^2) with
        # sup |t| g = s e^{-1/2} and sup g |t^2/s^2 - 1| = 1 (both at stated t)
        return self.scale * (2.0 * math.exp(-0.5) / self.sigma + 2.0 * self.a / self.sigma**2)

    @property
    def convex_kinks(self) -> tuple[np.ndarray, float]:
        jump = self.scale * math.exp(-2.0 * self.a**2 / self.sigma**2)
        return np.array([-2.0 * self.a, 2.0 * self.a]), jump

    @property
    def concave_kinks(self) -> tuple[np.ndarray, float]:
        # the triangular factor's corner at the center: rho' drops by 2 scale
        return np.array([0.0]), 2.0 * self.scale


@dataclass(frozen=True)
class ConvolvedSensorKernel(Kernel1D):
    """Box indicator of halfwidth b convolved with a spread kernel.

    For a cut Gaussian spread the value at t is the Gaussian integral over
    [t - b, t + b] intersected with [-a, a],

        scale * sigma * sqrt(pi/2) * (erf(hi / (sqrt 2 sigma)) - erf(lo / (sqrt 2 sigma))),

    the prefactor coming from int exp(-w^2 / (2 sigma^2)) dw
    = sigma sqrt(pi/2) erf(w / (sqrt 2 sigma)) evaluated at the clipped
    endpoints.  For the fast spread the value is the difference of the
    piecewise-quartic antiderivative at t + b and t - b.  Either way the
    derivative is spread(t + b) - spread(t - b).
    """

    spread: Kernel1D
    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("sensor halfwidth b must be positive")
        if not isinstance(self.spread, (CutGaussian1D, FastSpread1D)):
            raise ValueError("supported spreads: CutGaussian1D, FastSpread1D")

    @property
    def radius(self) -> float:
        return self.b + self.spread.radius

    def _eval(self, t):
        sp = self.spread
        if isinstance(sp, CutGaussian1D):
            lo = np.maximum(t - self.b, -sp.a)
            hi = np.minimum(t + self.b, sp.a)
            rt2s = _SQRT2 * sp.sigma
            v = sp.scale * sp.sigma * math.sqrt(math.pi / 2.0) * (erf(hi / rt2s) - erf(lo / rt2s))
            return np.where(lo < hi, v, 0.0)
        s = sp.sigma
        return 4.0 * (
            _fast_profile_antideriv((t + self.b) / s)
            - _fast_profile_antideriv((t - self.b) / s)
        )

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return self.spread(t + self.b) - self.spread(t - self.b)

    def deriv2(self, t):
        t = np.asarray(t, dtype=float)
        return self.spread.deriv(t + self.b) - self.spread.deriv(t - self.b)

    def deriv12(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n = t.size
        shifted = np.concatenate([t + self.b, t - self.b])
        sp = self.spread
        if isinstance(sp, CutGaussian1D):
            s2 = sp.sigma**2
            g = np.where(
                np.abs(shifted) <= sp.a, sp.scale * np.exp(-shifted * shifted / (2.0 * s2)), 0.0
            )
            val = g
            dval = -shifted / s2 * g
        else:
            y = shifted / sp.sigma
            val = (4.0 / sp.sigma) * _fast_profile(y)
            dval = (4.0 / sp.sigma**2) * _fast_profile_d1(y)
        return val[:n] - val[n:], dval[:n] - dval[n:]

    @property
    def lipschitz(self) -> float:
        return min(self.spread.peak, 2.0 * self.b * self.spread.lipschitz)

    @property
    def curvature(self) -> float:
        """Bound on |K''| = |psi'(t+b) - psi'(t-b)| away from the cut points.

        Either twice the spread's derivative bound, or the window form
        2b sup|psi''| plus any psi' jump the window can straddle.
        """
        sp = self.spread
        if isinstance(sp, CutGaussian1D):
            d2 = sp.scale / sp.sigma**2
            d1_jump = sp.scale * sp.a / sp.sigma**2 * math.exp(-sp.a**2 / (2.0 * sp.sigma**2))
            njump = 1 if self.b < sp.a else 2
            window = 2.0 * self.b * d2 + njump * d1_jump
        else:
            window = 2.0 * self.b * sp.curvature
        return min(2.0 * sp.lipschitz, window)

    @property
    def convex_kinks(self) -> tuple[np.ndarray, float]:
        sp = self.spread
        if isinstance(sp, CutGaussian1D):
            jump = sp.scale * math.exp(-sp.a**2 / (2.0 * sp.sigma**2))
            return np.array([-(sp.a + self.b), sp.a + self.b]), jump
        return _NO_KINKS

    @property
    def concave_kinks(self) -> tuple[np.ndarray, float]:
        sp = self.spread
        if isinstance(sp, CutGaussian1D):
            jump = sp.scale * math.exp(-sp.a**2 / (2.0 * sp.sigma**2))
            return np.array([-(sp.a - self.b), sp.a - self.b]), jump
        return _NO_KINKS


class ProductKernel:
    """Separable product of 1D factors, evaluated on points of shape (..., d).

    All factors are non-negative, so box bounds multiply per axis.
    """

    def __init__(self, factors: Sequence[Kernel1D]):
        if not factors:
            raise ValueError("need at least one factor")
        self.factors: tuple[Kernel1D, ...] = tuple(factors)

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def radius(self) -> np.ndarray:
        return np.array([f.radius for f in self.factors])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError("point dimension mismatch")
        out = self.factors[0](x[..., 0])
        for j in range(1, self.dim):
            out = out * self.factors[j](x[..., j])
        return out

    @property
    def peak(self) -> float:
        return float(np.prod([f.peak for f in self.factors]))

    @property
    def lipschitz(self) -> float:
        # 2-norm bound on the gradient of the product of bounded factors
        peaks = np.array([f.peak for f in self.factors])
        lips = np.array([f.lipschitz for f in self.factors])
        total = np.prod(peaks)
        parts = np.where(peaks > 0, total / np.where(peaks > 0, peaks, 1.0), 0.0) * lips
        return float(np.sqrt(np.sum(parts**2)))

    def bounds(self, cube: Cube) -> tuple[float, float]:
        if cube.dim != self.dim:
            raise ValueError("cube dimension mismatch")
        lb, ub = 1.0, 1.0
        for j, f in enumerate(self.factors):
            flb, fub = f.interval_bounds(cube.lower[j : j + 1], cube.upper[j : j + 1])
            lb *= float(flb[0])
            ub *= float(fub[0])
        return lb, ub


def axis_profiles(kernel, dim: int) -> tuple[Kernel1D, ...]:
    """Normalise a kernel argument to one 1D profile per axis."""
    if isinstance(kernel, ProductKernel):
        if kernel.dim != dim:
            raise ValueError("product kernel dimension mismatch")
        return kernel.factors
    if isinstance(kernel, Kernel1D):
        if dim != 1:
            raise ValueError("1D kernel used in dimension > 1; wrap in ProductKernel")
        return (kernel,)
    raise TypeError(f"not a kernel: {kernel!r}")


def bounds_on_cube(kernel, cube: Cube) -> tuple[float, float]:
    """Conservative (here: exact) lower/upper bounds of the kernel on a box."""
    return kernel.bounds(cube)


def lipschitz_constant(kernel) -> float:
    """Upper bound on the gradient norm of the kernel."""
    return kernel.lipschitz
