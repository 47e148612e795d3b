"""Outer solvers for point-source localisation over non-negative measures.

The master problem is

    min_{mu >= 0}  F0(A mu) + alpha ||mu||,

with A the sensor-grid forward operator, F0 a squared-distance or l1 data
fit, and ||.|| the total-variation (Radon) norm, i.e. the weighted sum of
spike masses.  All solvers keep mu as a finite list of weighted spikes.

Proximal family: each outer step linearises the data term at a base measure
and solves the surrogate

    min_{nu >= 0}  <eta, nu> + lam ||nu|| + 1/2 ||nu - base||_D^2

inexactly via ``insert_and_adjust``: alternate (a) weight optimisation on the
current support and (b) branch-and-bound search for the global minimiser of
zeta = D nu + eta + lam, inserting it as a new spike until zeta >= -eps holds
on the whole domain.  On exit zeta is within kappa*eps of zero on the
support, so nu is an eps-approximate surrogate minimiser.  ``run_mu_fb`` is
the plain forward-backward loop, ``run_mu_fista`` adds inertia over possibly
signed extrapolated weights, and ``run_mu_pdps`` replaces the gradient with a
dual sensor vector updated by its own proximal step (handling the nonsmooth
l1 data term, with optional dual-strong-convexity acceleration).

Baselines: ``run_fw`` implements the relaxed and fully corrective
conditional-gradient variants, inserting at the maximiser of |A_* residual|
and re-weighting either by a single forward-backward step or by a full
non-negative lasso solve, with barycentric merging of nearby spikes guarded
by data-term non-increase.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bisection import KernelSum, maximise
from .geometry import Cube, DiscreteMeasure, merge_spikes
from .operators import ParticleToWave, SensorGridOperator
from .record import RunRecord, is_sample_iteration
from .subsolvers import (
    InnerSolverConfig,
    SquaredL2DataTerm,
    solve_weights,
    solve_weights_full,
)

__all__ = [
    "ConfigurationError",
    "Problem",
    "ToleranceSchedule",
    "SolverConfig",
    "InsertionResult",
    "CertificationCheck",
    "insert_and_adjust",
    "certify_insertion",
    "evaluate_objective",
    "postprocess_weight_opt",
    "merge_with_data_guard",
    "run_mu_fb",
    "run_mu_fista",
    "run_mu_pdps",
    "run_fw",
]


class ConfigurationError(ValueError):
    """Invalid combination of solver, data term, or experiment options."""


@dataclass(frozen=True)
class Problem:
    """Forward operator, sensor data, data term, and regularisation weight."""

    op: SensorGridOperator
    data: np.ndarray
    data_term: type = SquaredL2DataTerm
    alpha: float = 0.1

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).ravel()
        if data.shape[0] != self.op.grid.count:
            raise ValueError("data length must match the sensor count")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def domain(self) -> Cube:
        return self.op.grid.domain

    @property
    def smoothing(self) -> ParticleToWave:
        return self.op.smoothing

    def objective(self, mu: DiscreteMeasure) -> float:
        return self.data_term.value(self.op.apply(mu), self.data) + self.alpha * mu.radon_norm()


def evaluate_objective(problem: Problem, mu: DiscreteMeasure) -> float:
    return problem.objective(mu)


@dataclass(frozen=True)
class ToleranceSchedule:
    """eps_k = c / (1 + theta k)^p; p > 1 makes the sequence summable."""

    c: float = 0.5
    theta: float = 0.2
    p: float = 1.4

    def __post_init__(self):
        if self.c <= 0 or self.theta < 0 or self.p <= 1:
            raise ValueError("need c > 0, theta >= 0, p > 1")

    def __call__(self, k: int) -> float:
        return self.c / (1.0 + self.theta * k) ** self.p


@dataclass
class SolverConfig:
    """Shared knobs for the outer solvers.

    ``tau``/``sigma0`` default to the standard steps derived from the
    operator dominance constant (0.99/L; 0.5/sqrt(L) and 1.98/sqrt(L) for the
    primal-dual method).  ``bootstrap_insertions`` caps point insertion at one
    per outer step for that many initial steps; ``tighten`` switches the
    inner accuracy to the stricter 1/(1 + k(|beta|+|beta0|)) scaling that
    yields the per-step descent estimate.  ``certify`` re-verifies the
    insertion conditions by an independent search sweep at logged iterations.
    """

    tau: float | None = None
    sigma0: float | None = None
    kappa: float = 0.5
    schedule: ToleranceSchedule = field(default_factory=ToleranceSchedule)
    max_outer: int = 2000
    bootstrap_insertions: int = 10
    accelerate: bool = True
    tighten: bool = False
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    max_insertions: int = 100
    max_spikes: int = 1000
    merge_radius: float = 0.02
    certify: bool = False


@dataclass
class _Tilt:
    """The affine part eta = tau*v - D(base): boundable and point-evaluable."""

    tree: KernelSum
    at: Callable[[np.ndarray], np.ndarray]


def _make_tilt(problem: Problem, tau: float, sensor_vector: np.ndarray, base: DiscreteMeasure) -> _Tilt:
    op = problem.op
    pw = problem.smoothing
    tree = KernelSum(op.dim)
    tree.add_term_group(op.conv_kernel, op.positions, tau * sensor_vector)
    base_locs = base.locations if len(base) else None
    base_w = base.weights if len(base) else None
    if base_locs is not None:
        tree.add_term_group(pw.kernel, base_locs, -base_w)

    def at(points: np.ndarray) -> np.ndarray:
        out = tau * op.preadjoint_at(sensor_vector, points)
        if base_locs is not None:
            out = out - pw.gram(points, base_locs) @ base_w
        return out

    return _Tilt(tree=tree, at=at)


@dataclass
class InsertionResult:
    measure: DiscreteMeasure
    zeta: KernelSum
    inner_iterations: int
    insertions: int
    certified: bool
    weight_residual: float
    search_nodes: int


def insert_and_adjust(
    measure: DiscreteMeasure,
    tilt: _Tilt,
    lam: float,
    eps: float,
    kappa: float,
    smoothing: ParticleToWave,
    domain: Cube,
    inner: InnerSolverConfig | None = None,
    insert_cap: int | None = None,
    tighten_index: int | None = None,
    max_insertions: int = 100,
) -> InsertionResult:
    """Alternate weight optimisation and global point insertion.

    Repeats until zeta = D nu + eta + lam is certified >= -eps over the
    domain (branch-and-bound at tolerance eps/10, so the certified bound is
    -eps - eps/10 in the worst case): solve the support-restricted quadratic
    to accuracy kappa*eps/(1 + ||beta||_1) — or the tightened variant when
    ``tighten_index`` k >= 1 is given — then insert the most violating point
    as a zero-weight spike and re-solve.  The input support is preserved as a
    prefix of the output support, in order.

    ``insert_cap`` bounds insertions for this call (bootstrap phase); hitting
    it, or the ``max_insertions`` guard, returns the current iterate with
    ``certified=False``.
    """
    inner = inner or InnerSolverConfig()
    dim = domain.dim
    if len(measure):
        locs = np.array(measure.locations, dtype=float)
        beta = np.maximum(measure.weights, 0.0)
    else:
        locs = np.empty((0, dim))
        beta = np.empty(0)
    ref_norm = float(np.sum(beta))
    if tighten_index is not None and tighten_index >= 1:
        k = float(tighten_index)

        def rhs(b):
            return kappa * eps / (1.0 + k * (float(np.sum(b)) + ref_norm))

    else:

        def rhs(b):
            return kappa * eps / (1.0 + float(np.sum(b)))

    inner_total = 0
    insertions = 0
    nodes = 0
    certified = False
    residual = 0.0
    while True:
        if len(locs):
            gram = smoothing.gram(locs)
            eta_s = tilt.at(locs)
            sol = solve_weights(gram, eta_s, lam, rhs, inner, beta0=beta)
            beta = sol.beta
            inner_total += sol.iterations
            residual = sol.residual
        zeta = KernelSum(dim, offset=lam)
        zeta.groups = list(tilt.tree.groups)
        if len(locs):
            zeta.add_term_group(smoothing.kernel, locs, beta)
        res = maximise(zeta.negated(), domain, tol=0.1 * eps, cutoff_low=0.9 * eps)
        nodes += res.nodes
        if res.value <= eps:
            certified = True
            break
        if insert_cap is not None and insertions >= insert_cap:
            break
        if insertions >= max_insertions:
            break
        x_new = res.point
        if len(locs) and np.min(np.max(np.abs(locs - x_new), axis=1)) <= 1e-9:
            break  # most violating point already in the support; cannot improve
        locs = np.vstack([locs, x_new[None, :]])
        beta = np.append(beta, 0.0)
        insertions += 1
    nu = DiscreteMeasure(locs, beta) if len(locs) else DiscreteMeasure.zero(dim)
    return InsertionResult(
        measure=nu,
        zeta=zeta,
        inner_iterations=inner_total,
        insertions=insertions,
        certified=certified,
        weight_residual=residual,
        search_nodes=nodes,
    )


@dataclass(frozen=True)
class CertificationCheck:
    passed: bool
    interior_bound: float
    support_max: float


def certify_insertion(zeta: KernelSum, measure: DiscreteMeasure, eps: float, domain: Cube) -> CertificationCheck:
    """Independent sweep of the insertion conditions at tolerance eps/10.

    Verifies zeta >= -(eps + eps/10) over the domain via a fresh search and
    |zeta| <= eps + eps/10 at every strictly positive spike.
    """
    slack = 1.1 * eps + 1e-12
    res = maximise(zeta.negated(), domain, tol=0.1 * eps, cutoff_low=eps)
    support_max = 0.0
    mu = measure.prune()
    if len(mu):
        support_max = float(np.max(np.abs(zeta(mu.locations))))
    passed = res.bound <= slack and support_max <= slack
    return CertificationCheck(passed=passed, interior_bound=float(res.bound), support_max=support_max)


def postprocess_weight_opt(
    problem: Problem,
    mu: DiscreteMeasure,
    accuracy: float = 1e-9,
    max_iterations: int = 2000,
) -> DiscreteMeasure:
    """Re-optimise weights on the fixed support (squared data term only).

    Warm-started forward-backward, so the objective cannot increase.
    """
    if not getattr(problem.data_term, "smooth", False):
        raise ConfigurationError("weight post-optimisation requires the squared data term")
    m = mu.prune()
    if not len(m):
        return m
    design = problem.op.design_matrix(m.locations)
    sol = solve_weights_full(
        design, problem.data, problem.alpha, accuracy, beta0=m.weights, max_iterations=max_iterations
    )
    return m.with_weights(sol.beta).prune()


def merge_with_data_guard(problem: Problem, mu: DiscreteMeasure, radius: float) -> tuple[DiscreteMeasure, int]:
    """Merge nearby spikes whenever the data term does not increase."""
    if len(mu) < 2:
        return mu, 0
    before = len(mu)
    state = {"f": problem.data_term.value(problem.op.apply(mu), problem.data)}

    def accept(candidate: DiscreteMeasure) -> bool:
        f = problem.data_term.value(problem.op.apply(candidate), problem.data)
        if f <= state["f"]:
            state["f"] = f
            return True
        return False

    merged = merge_spikes(mu, radius, accept)
    return merged, before - len(merged)


class _Tracker:
    """Accumulates the run record and in-memory diagnostics."""

    def __init__(self, problem: Problem, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.record = RunRecord()
        self.record.diagnostics.update(
            values=[], eps=[], certifications=[], flagged=[], lambdas=[], tau_sigma=[], search_nodes=0
        )
        self.cpu0 = time.process_time()
        self._inner = 0
        self._steps = 0
        self._merges = 0

    def note_step(self, inner_iterations: int, merges: int = 0, flagged_iteration: int | None = None, nodes: int = 0):
        self._inner += inner_iterations
        self._steps += 1
        self._merges += merges
        self.record.diagnostics["search_nodes"] += nodes
        if flagged_iteration is not None:
            self.record.diagnostics["flagged"].append(flagged_iteration)

    def log(self, k: int, mu: DiscreteMeasure) -> float:
        value = self.problem.objective(mu)
        self.record.diagnostics["values"].append(value)
        if is_sample_iteration(k):
            if getattr(self.problem.data_term, "smooth", False):
                post = self.problem.objective(postprocess_weight_opt(self.problem, mu))
            else:
                post = None
            mean_inner = self._inner / self._steps if self._steps else 0.0
            self.record.append(
                iter=k,
                cpu_time_s=time.process_time() - self.cpu0,
                value=value,
                post_value=post,
                spike_count=len(mu.prune()),
                inner_iters=mean_inner,
                merges=self._merges,
            )
            self._inner = 0
            self._steps = 0
            self._merges = 0
        return value

    def certify(self, k: int, result: InsertionResult, eps: float, domain: Cube):
        if self.config.certify and is_sample_iteration(k):
            check = certify_insertion(result.zeta, result.measure, eps, domain)
            self.record.diagnostics["certifications"].append((k, eps, check))


def _check_spike_budget(mu: DiscreteMeasure, config: SolverConfig):
    if len(mu) > config.max_spikes:
        raise RuntimeError(f"spike count {len(mu)} exceeded the budget {config.max_spikes}")


def _require_smooth(problem: Problem, what: str):
    if not getattr(problem.data_term, "smooth", False):
        raise ConfigurationError(f"{what} requires the squared-distance data term")


def run_mu_fb(problem: Problem, config: SolverConfig | None = None) -> tuple[DiscreteMeasure, RunRecord]:
    """Forward-backward outer loop (gradient step + proximal insertion)."""
    config = config or SolverConfig()
    _require_smooth(problem, "forward-backward")
    constants = problem.op.estimate_smoothness()
    tau = config.tau if config.tau is not None else 0.99 / constants.L
    mu = DiscreteMeasure.zero(problem.dim)
    tracker = _Tracker(problem, config)
    tracker.log(0, mu)
    for k in range(config.max_outer):
        eps = config.schedule(k + 1)
        tracker.record.diagnostics["eps"].append(eps)
        grad = problem.data_term.gradient(problem.op.apply(mu), problem.data)
        tilt = _make_tilt(problem, tau, grad, mu)
        result = insert_and_adjust(
            mu,
            tilt,
            tau * problem.alpha,
            eps,
            config.kappa,
            problem.smoothing,
            problem.domain,
            config.inner,
            insert_cap=1 if k < config.bootstrap_insertions else None,
            tighten_index=(k + 1) if config.tighten else None,
            max_insertions=config.max_insertions,
        )
        mu = result.measure.prune()
        _check_spike_budget(mu, config)
        tracker.note_step(
            result.inner_iterations,
            flagged_iteration=None if result.certified else k + 1,
            nodes=result.search_nodes,
        )
        tracker.certify(k + 1, result, eps, problem.domain)
        tracker.log(k + 1, mu)
    return mu, tracker.record


def _inertia_step(lam: float) -> tuple[float, float]:
    lam_next = 2.0 * lam / (lam + math.sqrt(4.0 + lam * lam))
    theta = lam_next * (1.0 / lam - 1.0)
    return lam_next, theta


def run_mu_fista(problem: Problem, config: SolverConfig | None = None) -> tuple[DiscreteMeasure, RunRecord]:
    """Inertial forward-backward: steps from extrapolated base measures.

    The extrapolated weights may be negative; the insertion step clips them
    for its warm start, and pruning removes only spikes that are zero in both
    the iterate and the extrapolated measure.
    """
    config = config or SolverConfig()
    _require_smooth(problem, "inertial forward-backward")
    constants = problem.op.estimate_smoothness()
    tau = config.tau if config.tau is not None else 0.99 / constants.L
    dim = problem.dim
    locs = np.empty((0, dim))
    w_cur = np.empty(0)
    w_breve = np.empty(0)
    lam_inertia = 1.0
    tracker = _Tracker(problem, config)
    tracker.log(0, DiscreteMeasure.zero(dim))
    for k in range(config.max_outer):
        eps = config.schedule(k + 1)
        tracker.record.diagnostics["eps"].append(eps)
        breve = DiscreteMeasure(locs, w_breve) if len(w_breve) else DiscreteMeasure.zero(dim)
        grad = problem.data_term.gradient(problem.op.apply(breve), problem.data)
        tilt = _make_tilt(problem, tau, grad, breve)
        result = insert_and_adjust(
            breve,
            tilt,
            tau * problem.alpha,
            eps,
            config.kappa,
            problem.smoothing,
            problem.domain,
            config.inner,
            insert_cap=1 if k < config.bootstrap_insertions else None,
            tighten_index=(k + 1) if config.tighten else None,
            max_insertions=config.max_insertions,
        )
        new_locs = result.measure.locations
        w_next = result.measure.weights
        grow = len(w_next) - len(w_cur)
        w_prev = np.concatenate([w_cur, np.zeros(grow)]) if grow else w_cur
        lam_inertia, theta = _inertia_step(lam_inertia)
        tracker.record.diagnostics["lambdas"].append(lam_inertia)
        w_breve_next = (1.0 + theta) * w_next - theta * w_prev
        keep = ~((w_next == 0.0) & (w_breve_next == 0.0))
        locs = np.array(new_locs[keep])
        w_cur = w_next[keep]
        w_breve = w_breve_next[keep]
        mu = DiscreteMeasure(locs, w_cur) if len(w_cur) else DiscreteMeasure.zero(dim)
        _check_spike_budget(mu.prune(), config)
        tracker.note_step(
            result.inner_iterations,
            flagged_iteration=None if result.certified else k + 1,
            nodes=result.search_nodes,
        )
        tracker.certify(k + 1, result, eps, problem.domain)
        tracker.log(k + 1, mu)
    final = DiscreteMeasure(locs, w_cur) if len(w_cur) else DiscreteMeasure.zero(dim)
    return final.prune(), tracker.record


def run_mu_pdps(
    problem: Problem, config: SolverConfig | None = None
) -> tuple[DiscreteMeasure, np.ndarray, RunRecord]:
    """Primal-dual proximal splitting; handles the nonsmooth l1 data term.

    The dual sensor vector y replaces the data-term gradient in the surrogate
    tilt.  With the squared data term the dual proximal map is strongly
    convex and the steps can be accelerated while keeping tau_k sigma_k
    constant; tau is updated from that invariant so the product is preserved
    to machine precision.
    """
    config = config or SolverConfig()
    constants = problem.op.estimate_smoothness()
    tau = config.tau if config.tau is not None else 0.5 / math.sqrt(constants.L)
    sigma = config.sigma0 if config.sigma0 is not None else 1.98 / math.sqrt(constants.L)
    if tau * sigma * constants.L >= 1.0:
        raise ConfigurationError("step sizes violate tau*sigma*L < 1")
    accelerate = config.accelerate and problem.data_term.dual_strong_convexity > 0.0
    gamma = problem.data_term.dual_strong_convexity
    step_product = tau * sigma
    y = problem.data_term.initial_dual(problem.data)
    mu = DiscreteMeasure.zero(problem.dim)
    tracker = _Tracker(problem, config)
    tracker.log(0, mu)
    for k in range(config.max_outer):
        eps = config.schedule(k + 1)
        tracker.record.diagnostics["eps"].append(eps)
        tilt = _make_tilt(problem, tau, y, mu)
        result = insert_and_adjust(
            mu,
            tilt,
            tau * problem.alpha,
            eps,
            config.kappa,
            problem.smoothing,
            problem.domain,
            config.inner,
            insert_cap=1 if k < config.bootstrap_insertions else None,
            tighten_index=(k + 1) if config.tighten else None,
            max_insertions=config.max_insertions,
        )
        mu_next = result.measure.prune()
        _check_spike_budget(mu_next, config)
        if accelerate:
            omega = 1.0 / math.sqrt(1.0 + gamma * sigma)
            sigma = sigma * omega
            tau = step_product / sigma
        else:
            omega = 1.0
        forward = (1.0 + omega) * problem.op.apply(mu_next) - omega * problem.op.apply(mu)
        y = problem.data_term.prox_dual(y + sigma * forward, sigma, problem.data)
        mu = mu_next
        tracker.record.diagnostics["tau_sigma"].append((tau, sigma))
        tracker.note_step(
            result.inner_iterations,
            flagged_iteration=None if result.certified else k + 1,
            nodes=result.search_nodes,
        )
        tracker.certify(k + 1, result, eps, problem.domain)
        tracker.log(k + 1, mu)
    return mu, y, tracker.record


def run_fw(
    problem: Problem, config: SolverConfig | None = None, variant: str = "fully_corrective"
) -> tuple[DiscreteMeasure, RunRecord]:
    """Conditional-gradient baselines: insert at the peak of |A_* residual|.

    ``relaxed`` re-weights by a single forward-backward step on all weights
    after a line-search initialisation of the new atom; ``fully_corrective``
    re-solves the non-negative lasso on the support.  Both merge nearby
    spikes each iteration when the data term allows.
    """
    config = config or SolverConfig()
    if variant not in ("relaxed", "fully_corrective"):
        raise ConfigurationError(f"unknown conditional-gradient variant: {variant!r}")
    _require_smooth(problem, "conditional gradient")
    op = problem.op
    alpha = problem.alpha
    dim = problem.dim
    locs = np.empty((0, dim))
    w = np.empty(0)
    tracker = _Tracker(problem, config)
    tracker.log(0, DiscreteMeasure.zero(dim))
    for k in range(config.max_outer):
        eps = config.schedule(k + 1)
        mu = DiscreteMeasure(locs, w) if len(w) else DiscreteMeasure.zero(dim)
        resid = op.apply(mu) - problem.data
        vtree = KernelSum(dim)
        vtree.add_term_group(op.conv_kernel, op.positions, resid)
        up = maximise(vtree, problem.domain, tol=0.1 * eps, cutoff_low=0.9 * alpha)
        down = maximise(vtree.negated(), problem.domain, tol=0.1 * eps, cutoff_low=0.9 * alpha)
        nodes = up.nodes + down.nodes
        x_new = down.point if down.value >= up.value else up.point
        is_new = not (len(locs) and np.min(np.max(np.abs(locs - x_new), axis=1)) <= 1e-12)
        if is_new:
            atom = op.design_matrix(x_new[None, :])[:, 0]
            denom = float(atom @ atom)
            v_exact = float(atom @ resid)
            init = max(0.0, (-v_exact - alpha) / denom) if denom > 0 else 0.0
            locs = np.vstack([locs, x_new[None, :]])
            w = np.append(w, init)
        inner_iters = 0
        merges = 0
        if len(w):
            design = op.design_matrix(locs)
            if variant == "relaxed":
                normal = design.T @ design
                step = 0.99 / max(float(np.max(np.sum(np.abs(normal), axis=1))), 1e-300)
                grad_w = design.T @ (design @ w - problem.data)
                w = np.maximum(0.0, w - step * grad_w - step * alpha)
                inner_iters = 1
            else:
                sol = solve_weights_full(
                    design, problem.data, alpha, 0.1 * eps, beta0=w, max_iterations=2000
                )
                w = sol.beta
                inner_iters = sol.iterations
            keep = w > 0.0
            locs = np.array(locs[keep])
            w = w[keep]
            merged, merges = merge_with_data_guard(
                problem, DiscreteMeasure(locs, w) if len(w) else DiscreteMeasure.zero(dim), config.merge_radius
            )
            locs = np.array(merged.locations) if len(merged) else np.empty((0, dim))
            w = np.array(merged.weights) if len(merged) else np.empty(0)
        mu = DiscreteMeasure(locs, w) if len(w) else DiscreteMeasure.zero(dim)
        _check_spike_budget(mu, config)
        tracker.note_step(inner_iters, merges=merges, nodes=nodes)
        tracker.log(k + 1, mu)
    final = DiscreteMeasure(locs, w) if len(w) else DiscreteMeasure.zero(dim)
    return final, tracker.record
