"""Weight optimisation over a fixed spike support, and the proximal maps.

Every outer solver repeatedly minimises, over weights beta >= 0 on the
current support S,

    q(beta) = 1/2 beta' D beta + eta' beta + lam sum(beta),

where D is the smoothing Gram matrix (or Phi' Phi for the fully corrective
conditional-gradient variant), eta collects the linearised data term, and
lam the scaled regularisation weight.  Optimality at beta is one-sided: with
g = D beta + eta + lam, coordinates with beta_i > 0 need g_i = 0 while
coordinates at the bound only need g_i >= 0.  ``optimality_residual`` returns
exactly that signed violation, and solvers stop when its sup-norm is below a
caller-supplied accuracy (which may depend on beta, as the outer algorithms
tie it to 1/(1 + ||beta||_1)).

Two inner methods: plain forward-backward iteration with a Gershgorin step,
and a primal active-set semismooth Newton method on the fixed point equation
beta = max(0, beta - tau (D beta + eta) - tau lam), which solves the reduced
linear system on the predicted active set each sweep (iterates may dip
negative transiently) and falls back to forward-backward when the reduced
system is singular or cycling.  The step written as "0.99 times a Lipschitz
estimate" in the source material is implemented as 0.99 divided by the
Gershgorin bound — the only reading that yields a convergent iteration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "prox_nonneg_l1",
    "prox_dual_l2sq",
    "prox_dual_l1",
    "InnerSolverConfig",
    "WeightSolution",
    "optimality_residual",
    "subgradient_certificate",
    "solve_weights",
    "solve_weights_full",
    "SquaredL2DataTerm",
    "L1DataTerm",
    "data_term_by_name",
]


def prox_nonneg_l1(v: np.ndarray, t: float) -> np.ndarray:
    """Prox of t*||.||_1 + nonnegativity: shrink by t and clip at zero."""
    return np.maximum(0.0, np.asarray(v, dtype=float) - t)


def prox_dual_l2sq(y: np.ndarray, sigma: float, b: np.ndarray) -> np.ndarray:
    """Dual prox for the squared-distance data term: (y - sigma b)/(1 + sigma)."""
    return (np.asarray(y, dtype=float) - sigma * b) / (1.0 + sigma)


def prox_dual_l1(y: np.ndarray, sigma: float, b: np.ndarray) -> np.ndarray:
    """Dual prox for the l1 data term: clamp(y - sigma b, -1, 1)."""
    return np.clip(np.asarray(y, dtype=float) - sigma * b, -1.0, 1.0)


@dataclass
class InnerSolverConfig:
    method: str = "ssn"  # "ssn" or "fb"
    step: float | None = None  # None: 0.99 / Gershgorin bound of D
    tolerance: float = 1e-11
    max_iterations: int = 2000


@dataclass
class WeightSolution:
    beta: np.ndarray
    certificate: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _gershgorin(D: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(D), axis=1))) if D.size else 1.0


def optimality_residual(D, eta, lam, beta) -> np.ndarray:
    """Signed one-sided optimality violation of the nonnegative problem."""
    g = D @ beta + eta + lam
    return np.where(beta > 0.0, g, np.minimum(0.0, g))


def subgradient_certificate(D, eta, lam, beta) -> np.ndarray:
    """w in the l1 subdifferential at beta minimising ||D beta + eta + lam w||.

    By construction w_i = 1 wherever beta_i > 0 and |w_i| <= 1 everywhere.
    """
    w = np.ones_like(beta)
    if lam > 0.0:
        g = D @ beta + eta
        at_zero = beta <= 0.0
        w[at_zero] = np.clip(-g[at_zero] / lam, -1.0, 1.0)
    return w


def _as_accuracy(accuracy) -> Callable[[np.ndarray], float]:
    if callable(accuracy):
        return accuracy
    value = float(accuracy)
    return lambda beta: value


def _fb_path(D, eta, lam, rhs, beta0, step, max_iter):
    beta = np.maximum(beta0, 0.0)
    best = beta
    best_res = float(np.max(np.abs(optimality_residual(D, eta, lam, beta)), initial=0.0))
    if best_res <= rhs(beta):
        return best, best_res, 0, True
    for it in range(1, max_iter + 1):
        beta = prox_nonneg_l1(beta - step * (D @ beta + eta), step * lam)
        res = float(np.max(np.abs(optimality_residual(D, eta, lam, beta)), initial=0.0))
        if res < best_res:
            best, best_res = beta, res
        if res <= rhs(beta):
            return beta, res, it, True
    return best, best_res, max_iter, False


def _ssn_path(D, eta, lam, rhs, beta0, step, max_iter):
    beta = np.maximum(beta0, 0.0)
    it = 0
    prev_active = None
    while it < max_iter:
        it += 1
        plus = np.maximum(beta, 0.0)
        res_vec = optimality_residual(D, eta, lam, plus)
        res = float(np.max(np.abs(res_vec), initial=0.0))
        if res <= rhs(plus):
            return plus, res, it - 1, True
        active = (beta - step * (D @ beta + eta + lam)) > 0.0
        if not active.any():
            beta = np.zeros_like(beta)
            continue
        if prev_active is not None and np.array_equal(active, prev_active):
            break  # stalled: reduced solve cannot improve further
        prev_active = active
        idx = np.flatnonzero(active)
        try:
            x = np.linalg.solve(D[np.ix_(idx, idx)], -(eta[idx] + lam))
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(x)):
            break
        beta = np.zeros_like(beta)
        beta[idx] = x
    # Newton stalled or hit a singular reduced system: finish with
    # forward-backward from the best feasible point.
    return _fb_path(D, eta, lam, rhs, np.maximum(beta, 0.0), step, max_iter - it)


def solve_weights(
    D: np.ndarray,
    eta: np.ndarray,
    lam: float,
    accuracy,
    config: InnerSolverConfig | None = None,
    beta0: np.ndarray | None = None,
) -> WeightSolution:
    """Minimise the support-restricted quadratic over beta >= 0.

    ``accuracy`` is either a float or a function of the candidate beta giving
    the sup-norm residual target.  Returns the weights, the subgradient
    certificate, the achieved residual and a convergence flag (an exhausted
    iteration budget returns the best iterate flagged unconverged).
    """
    cfg = config or InnerSolverConfig()
    D = np.asarray(D, dtype=float)
    eta = np.asarray(eta, dtype=float).ravel()
    n = eta.shape[0]
    if D.shape != (n, n):
        raise ValueError("D must be square and match eta")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    rhs = _as_accuracy(accuracy)
    beta0 = np.zeros(n) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    step = cfg.step if cfg.step is not None else 0.99 / max(_gershgorin(D), 1e-300)
    if cfg.method == "fb":
        beta, res, its, ok = _fb_path(D, eta, lam, rhs, beta0, step, cfg.max_iterations)
    elif cfg.method == "ssn":
        beta, res, its, ok = _ssn_path(D, eta, lam, rhs, beta0, step, cfg.max_iterations)
    else:
        raise ValueError(f"unknown inner solver method: {cfg.method!r}")
    w = subgradient_certificate(D, eta, lam, beta)
    return WeightSolution(beta=beta, certificate=w, residual=res, iterations=its, converged=ok)


def solve_weights_full(
    design: np.ndarray,
    b: np.ndarray,
    alpha: float,
    accuracy,
    beta0: np.ndarray | None = None,
    max_iterations: int = 2000,
) -> WeightSolution:
    """Nonnegative lasso min 1/2||design beta - b||^2 + alpha sum(beta).

    Forward-backward on the normal-equations form, stopping once the minimal
    subgradient norm drops below ``accuracy`` or after ``max_iterations``.
    """
    design = np.asarray(design, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    D = design.T @ design
    eta = -design.T @ b
    sol = solve_weights(
        D,
        eta,
        alpha,
        accuracy,
        InnerSolverConfig(method="fb", max_iterations=max_iterations),
        beta0=beta0,
    )
    return sol


class SquaredL2DataTerm:
    """F0 = 1/2 ||y - b||^2: smooth, with strongly convex conjugate."""

    name = "l2sq"
    smooth = True
    dual_strong_convexity = 1.0

    @staticmethod
    def value(y, b) -> float:
        d = np.asarray(y, dtype=float) - b
        return 0.5 * float(d @ d)

    @staticmethod
    def gradient(y, b) -> np.ndarray:
        return np.asarray(y, dtype=float) - b

    @staticmethod
    def prox_dual(y, sigma, b) -> np.ndarray:
        return prox_dual_l2sq(y, sigma, b)

    @staticmethod
    def initial_dual(b) -> np.ndarray:
        return -np.asarray(b, dtype=float)


class L1DataTerm:
    """F0 = ||y - b||_1: robust to outlier sensors, nonsmooth."""

    name = "l1"
    smooth = False
    dual_strong_convexity = 0.0

    @staticmethod
    def value(y, b) -> float:
        return float(np.sum(np.abs(np.asarray(y, dtype=float) - b)))

    @staticmethod
    def prox_dual(y, sigma, b) -> np.ndarray:
        return prox_dual_l1(y, sigma, b)

    @staticmethod
    def initial_dual(b) -> np.ndarray:
        return -np.sign(np.asarray(b, dtype=float))


_DATA_TERMS = {"l2sq": SquaredL2DataTerm, "l1": L1DataTerm}


def data_term_by_name(name: str):
    try:
        return _DATA_TERMS[name]
    except KeyError:
        raise ValueError(f"unknown data term: {name!r}") from None
