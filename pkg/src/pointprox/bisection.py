"""Global optimisation of sums of separable kernel bumps on a box.

The objective handled here is

    f(x) = offset + sum_g sum_i w_{g,i} prod_j k_{g,j}(x_j - c_{g,i,j}),

a weighted sum of translated copies of separable kernels (one translate per
"term", terms sharing a kernel collected into a group).  Because every 1D
factor is even, non-negative and non-increasing in |t|, exact per-term bounds
on any axis-aligned box are available in closed form, which makes a plain
branch-and-bound search both simple and certifiable.

``maximise`` returns the best point found together with a certified upper
bound on the true supremum.  The search keeps a max-heap of boxes ordered by
their upper bounds and stops as soon as the largest remaining upper bound is
within ``tol`` of the best value seen (or of ``cutoff_low``, whichever is
larger — callers that only need to know whether the supremum exceeds a level
can pass that level as ``cutoff_low`` and save most of the work).

On the first visit to a box a separable quadratic model at the midpoint is
maximised in closed form and the objective is evaluated at the model argmax;
this usually locates local maxima to near machine precision long before the
boxes around them have shrunk, so the search spends its nodes proving bounds
rather than polishing the incumbent.

The search is called once or more per outer iteration of the measure-space
solvers, so the box bookkeeping below deliberately works on raw coordinate
arrays rather than :class:`~pointprox.geometry.Cube` instances.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Cube
from .kernels import Kernel1D, axis_profiles

__all__ = [
    "KernelSum",
    "SearchResult",
    "BisectionSearchError",
    "maximise",
    "minimise",
]


class BisectionSearchError(RuntimeError):
    """Raised when the search exceeds its node budget without terminating."""


class _TermGroup:
    """Translates of one separable kernel: centers (n, d), weights (n,)."""

    __slots__ = (
        "factors",
        "centers",
        "weights",
        "radii",
        "axis_centers",
        "absw",
        "kcurv",
        "kup",
        "kdn",
        "ksorted",
        "kpre_pos",
        "kpre_neg",
    )

    def __init__(self, factors: tuple[Kernel1D, ...], centers: np.ndarray, weights: np.ndarray):
        self.factors = factors
        self.centers = centers
        self.weights = weights
        self.radii = np.array([f.radius for f in factors])
        self.axis_centers = tuple(np.ascontiguousarray(centers[:, j]) for j in range(len(factors)))
        self.absw = np.abs(weights)
        self.kcurv = factors[0].curvature
        self.kup = factors[0].convex_kinks
        self.kdn = factors[0].concave_kinks
        if len(factors) == 1 and (self.kup[0].size or self.kdn[0].size):
            # kink mass lookups by center order: prefix sums of |w| split by sign
            order = np.argsort(self.axis_centers[0], kind="stable")
            self.ksorted = self.axis_centers[0][order]
            awo = self.absw[order]
            pos = weights[order] > 0.0
            self.kpre_pos = np.concatenate([[0.0], np.cumsum(awo * pos)])
            self.kpre_neg = np.concatenate([[0.0], np.cumsum(awo * ~pos)])
        else:
            self.ksorted = None
            self.kpre_pos = None
            self.kpre_neg = None

    def evaluate(self, x: np.ndarray) -> float:
        d = x - self.centers
        vals = self.factors[0](d[:, 0])
        for j in range(1, len(self.factors)):
            vals = vals * self.factors[j](d[:, j])
        return float(self.weights @ vals)

    def box_data(self, lo, hi, mid, idx) -> tuple[np.ndarray, float, float]:
        """One pass over a box: (active subset of idx, upper bound, midpoint value).

        Terms whose support cannot meet the box are dropped from the subset.
        The bound is exact per term: each factor attains its max at the point
        of the box closest to the center and its min at the farthest corner,
        and the factors are non-negative, so products of per-axis extremes
        bound the product.  ``-t_lo >= t_hi`` selects the endpoint of larger
        modulus (it says the interval midpoint lies left of the center).
        """
        if idx.size == 0:
            return idx, 0.0, 0.0
        factors = self.factors
        if len(factors) == 1:
            c = self.axis_centers[0][idx]
            t_lo = lo[0] - c
            t_hi = hi[0] - c
            r = self.radii[0]
            keep = (t_lo <= r) & (t_hi >= -r)
            if not keep.any():
                return idx[:0], 0.0, 0.0
            sub = idx[keep]
            t_lo = t_lo[keep]
            t_hi = t_hi[keep]
            near = np.where(t_lo > 0.0, t_lo, np.where(t_hi < 0.0, t_hi, 0.0))
            far = np.where(-t_lo >= t_hi, t_lo, t_hi)
            m = sub.size
            vals = factors[0]._eval(np.concatenate([far, near, 0.5 * (t_lo + t_hi)]))
            kmin = vals[:m]
            kmax = vals[m : 2 * m]
            vmid = vals[2 * m :]
            w = self.weights[sub]
            ub = np.where(w > 0.0, w * kmax, w * kmin).sum()
            return sub, float(ub), float(w @ vmid)
        keep = None
        t_los = []
        t_his = []
        for j in range(len(factors)):
            c = self.axis_centers[j][idx]
            t_lo = lo[j] - c
            t_hi = hi[j] - c
            a = (t_lo <= self.radii[j]) & (t_hi >= -self.radii[j])
            keep = a if keep is None else keep & a
            t_los.append(t_lo)
            t_his.append(t_hi)
        if not keep.any():
            return idx[:0], 0.0, 0.0
        sub = idx[keep]
        m = sub.size
        pmax = pmin = pmid = None
        for j, fa in enumerate(factors):
            t_lo = t_los[j][keep]
            t_hi = t_his[j][keep]
            near = np.where(t_lo > 0.0, t_lo, np.where(t_hi < 0.0, t_hi, 0.0))
            far = np.where(-t_lo >= t_hi, t_lo, t_hi)
            vals = fa._eval(np.concatenate([far, near, 0.5 * (t_lo + t_hi)]))
            kmin = vals[:m]
            kmax = vals[m : 2 * m]
            vm = vals[2 * m :]
            pmax = kmax if pmax is None else pmax * kmax
            pmin = kmin if pmin is None else pmin * kmin
            pmid = vm if pmid is None else pmid * vm
        w = self.weights[sub]
        ub = np.where(w > 0.0, w * pmax, w * pmin).sum()
        return sub, float(ub), float(w @ pmid)

    def model1d(self, mid0: float, idx: np.ndarray) -> tuple[float, float]:
        """Gradient and curvature of the group at a scalar midpoint (1D only)."""
        t = mid0 - self.axis_centers[0][idx]
        w = self.weights[idx]
        d1, d2 = self.factors[0].deriv12(t)
        return float(w @ d1), float(w @ d2)

    def refine_grad_kinks(self, lo0: float, hi0: float, mid0: float, sub: np.ndarray) -> tuple[float, float]:
        """Exact midpoint gradient of the active terms plus the derivative
        jump mass of kinks inside the box (second-order box bound, 1D).

        Kink mass is read off prefix sums over all terms of the group in
        center order (a term's kinks lie within its support, so inactive
        terms contribute only when the box touches their support edge;
        including them keeps the bound valid and the lookup O(log n))."""
        c = self.axis_centers[0][sub]
        w = self.weights[sub]
        gm = float(w @ self.factors[0].deriv(mid0 - c))
        kg = 0.0
        if self.ksorted is not None:
            cs = self.ksorted
            offs, jump = self.kup
            for off in offs:
                i0 = cs.searchsorted(lo0 - off, "left")
                i1 = cs.searchsorted(hi0 - off, "right")
                if i1 > i0:
                    kg += jump * (self.kpre_pos[i1] - self.kpre_pos[i0])
            offs, jump = self.kdn
            for off in offs:
                i0 = cs.searchsorted(lo0 - off, "left")
                i1 = cs.searchsorted(hi0 - off, "right")
                if i1 > i0:
                    kg += jump * (self.kpre_neg[i1] - self.kpre_neg[i0])
        return gm, kg

    def model(self, x: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Value, gradient and diagonal second derivatives at x (active terms)."""
        d = x - self.centers[idx]
        w = self.weights[idx]
        ndim = len(self.factors)
        vals = [self.factors[j](d[:, j]) for j in range(ndim)]
        d1 = [self.factors[j].deriv(d[:, j]) for j in range(ndim)]
        d2 = [self.factors[j].deriv2(d[:, j]) for j in range(ndim)]
        prod = np.ones_like(w)
        for v in vals:
            prod = prod * v
        f0 = float(w @ prod)
        grad = np.empty(ndim)
        hdiag = np.empty(ndim)
        for j in range(ndim):
            others = np.ones_like(w)
            for m in range(ndim):
                if m != j:
                    others = others * vals[m]
            grad[j] = float(w @ (d1[j] * others))
            hdiag[j] = float(w @ (d2[j] * others))
        return f0, grad, hdiag


class KernelSum:
    """Weighted sum of kernel translates plus a constant offset."""

    def __init__(self, dim: int, offset: float = 0.0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.offset = float(offset)
        self.groups: list[_TermGroup] = []

    def add_term_group(self, kernel, centers, weights) -> None:
        """Add translates of ``kernel`` at ``centers`` with ``weights``.

        Translates of a kernel already present are folded into the existing
        group, which keeps the per-box bookkeeping of the search at one pass
        per distinct kernel.
        """
        factors = axis_profiles(kernel, self.dim)
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[1] != self.dim:
            raise ValueError("center dimension mismatch")
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape[0] != centers.shape[0]:
            raise ValueError("need one weight per center")
        if not weights.size:
            return
        for i, g in enumerate(self.groups):
            if g.factors == factors:
                self.groups[i] = _TermGroup(
                    factors,
                    np.concatenate([g.centers, centers]),
                    np.concatenate([g.weights, weights]),
                )
                return
        self.groups.append(_TermGroup(factors, centers, weights))

    @property
    def term_count(self) -> int:
        return sum(g.weights.size for g in self.groups)

    def negated(self) -> KernelSum:
        out = KernelSum(self.dim, -self.offset)
        for g in self.groups:
            out.groups.append(_TermGroup(g.factors, g.centers, -g.weights))
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.offset + sum(g.evaluate(x) for g in self.groups)
        return np.array([self(p) for p in x])


@dataclass
class SearchResult:
    """Outcome of a branch-and-bound search.

    ``value`` is the objective at ``point`` (a feasible value), ``bound`` a
    certified bound on the true optimum: for ``maximise`` the supremum lies in
    [value, bound] unless it is below ``cutoff_low``, in which case only
    ``bound`` is meaningful.  ``nodes`` counts boxes taken off the heap.
    """

    point: np.ndarray
    value: float
    bound: float
    nodes: int
    evaluations: int


class _Node:
    __slots__ = ("lo", "hi", "depth", "actives", "ub", "midval", "marked")

    def __init__(self, lo, hi, depth, actives, ub, midval):
        self.lo = lo
        self.hi = hi
        self.depth = depth
        self.actives = actives
        self.ub = ub
        self.midval = midval
        self.marked = False


def _probe(
    f: KernelSum, lo, hi, parent_actives, eff: float = -math.inf, refine: bool = False
) -> tuple[list, float, float, np.ndarray]:
    """Filter actives, bound, and evaluate the midpoint of one box.

    With ``refine`` set (1D, all factors of certified curvature) a box whose
    per-term interval bound survives the pruning level ``eff`` gets a second
    bound from the exact midpoint gradient of the sum plus curvature and
    derivative-jump caps:

        f(x) <= f(m) + |f'(m)| h/2 + C h^2 / 8 + (h/2) J_box.

    Per-term interval bounds ignore the slope cancellation between terms, so
    near interior maxima of the sum this quadratic form is far tighter; the
    smaller of the two bounds is used.
    """
    mid = 0.5 * (lo + hi)
    ub = f.offset
    val = f.offset
    actives = []
    for g, idx in zip(f.groups, parent_actives):
        sub, gub, gval = g.box_data(lo, hi, mid, idx)
        actives.append(sub)
        ub += gub
        val += gval
    if refine and ub > eff:
        h = hi[0] - lo[0]
        curv = 0.0
        for g, sub in zip(f.groups, actives):
            if sub.size:
                curv += g.kcurv * float(g.absw[sub].sum())
        quad = val + 0.125 * curv * h * h
        # the other terms of the quadratic bound are non-negative, so when
        # the curvature part alone already reaches the interval bound the
        # gradient and kink passes cannot pay off
        if quad < ub:
            gm = 0.0
            kink = 0.0
            for g, sub in zip(f.groups, actives):
                if sub.size:
                    gg, kg = g.refine_grad_kinks(lo[0], hi[0], mid[0], sub)
                    gm += gg
                    kink += kg
            ub2 = quad + 0.5 * h * (abs(gm) + kink)
            if ub2 < ub:
                ub = ub2
    return actives, ub, val, mid


def _eval_active(f: KernelSum, x: np.ndarray, actives) -> float:
    total = f.offset
    if f.dim == 1:
        x0 = x[0]
        for g, idx in zip(f.groups, actives):
            if idx.size:
                vals = g.factors[0]._eval(x0 - g.axis_centers[0][idx])
                total += float(g.weights[idx] @ vals)
        return total
    for g, idx in zip(f.groups, actives):
        if idx.size:
            d = x - g.centers[idx]
            vals = g.factors[0](d[:, 0])
            for j in range(1, f.dim):
                vals = vals * g.factors[j](d[:, j])
            total += float(g.weights[idx] @ vals)
    return total


def _model_argmax(f: KernelSum, node: _Node) -> tuple[np.ndarray, float]:
    """Maximise the separable midpoint quadratic over the node's box.

    The model's constant term is the midpoint value cached on the node, so
    only derivatives are computed here; in 1D a scalar closed form avoids
    the vector bookkeeping entirely.
    """
    if f.dim == 1:
        mid0 = 0.5 * (node.lo[0] + node.hi[0])
        r0 = 0.5 * (node.hi[0] - node.lo[0])
        g1 = 0.0
        h1 = 0.0
        for g, idx in zip(f.groups, node.actives):
            if idx.size:
                gg, hh = g.model1d(mid0, idx)
                g1 += gg
                h1 += hh
        edge = abs(g1) * r0 + 0.5 * h1 * r0 * r0
        if g1 != 0.0:
            step = math.copysign(r0, g1)
        else:
            step = r0 if h1 > 0.0 else 0.0
        gain = edge
        if h1 < 0.0 and abs(g1) <= -h1 * r0:
            v_int = -g1 * g1 / (2.0 * h1)
            if v_int >= edge:
                step = -g1 / h1
                gain = v_int
        return np.array([mid0 + step]), node.midval + gain

    mid = 0.5 * (node.lo + node.hi)
    r = 0.5 * (node.hi - node.lo)
    f0 = f.offset
    grad = np.zeros(f.dim)
    hdiag = np.zeros(f.dim)
    for g, idx in zip(f.groups, node.actives):
        if idx.size:
            v, gr, hd = g.model(mid, idx)
            f0 += v
            grad += gr
            hdiag += hd
    # per axis: max of g*t + h*t^2/2 over [-r, r]
    edge = np.abs(grad) * r + 0.5 * hdiag * r * r
    step = np.sign(grad) * r
    step[(grad == 0.0) & (hdiag > 0.0)] = r[(grad == 0.0) & (hdiag > 0.0)]
    interior_ok = (hdiag < 0.0) & (np.abs(grad) <= -hdiag * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_int = np.where(interior_ok, -grad / np.where(hdiag < 0, hdiag, -1.0), 0.0)
        v_int = np.where(interior_ok, -grad * grad / (2.0 * np.where(hdiag < 0, hdiag, -1.0)), -np.inf)
    use_int = interior_ok & (v_int >= edge)
    gain = np.where(use_int, v_int, edge)
    step = np.where(use_int, t_int, step)
    return mid + step, f0 + float(np.sum(gain))


def maximise(
    f: KernelSum,
    domain: Cube,
    tol: float,
    cutoff_low: float = -math.inf,
    max_nodes: int = 10_000_000,
    max_depth: int = 40,
) -> SearchResult:
    """Find the maximum of ``f`` over ``domain`` to within ``tol``.

    Terminates once the largest outstanding box bound is at most
    ``max(best value, cutoff_low) + tol``; the returned ``bound`` is then a
    valid upper bound for the supremum of ``f`` over the whole domain.
    """
    if domain.dim != f.dim:
        raise ValueError("domain dimension mismatch")
    if tol <= 0:
        raise ValueError("tol must be positive")
    dim = f.dim
    lo0 = np.array(domain.lower, dtype=float)
    hi0 = np.array(domain.upper, dtype=float)
    if f.term_count == 0:
        mid = 0.5 * (lo0 + hi0)
        return SearchResult(mid, f.offset, f.offset, 0, 1)

    refine = dim == 1 and all(math.isfinite(g.kcurv) for g in f.groups)
    all_idx = [np.arange(g.weights.size) for g in f.groups]
    actives0, ub0, v_best, x_best = _probe(f, lo0, hi0, all_idx, cutoff_low, refine)
    evals = 1
    capped_ub = -math.inf

    heap: list[tuple[float, int, _Node]] = []
    seq = itertools.count()
    heapq.heappush(heap, (-ub0, next(seq), _Node(lo0, hi0, 0, actives0, ub0, v_best)))
    nodes = 0
    nsplit = 1 << dim

    while heap:
        eff = max(v_best, cutoff_low)
        ub_top = -heap[0][0]
        if ub_top <= eff + tol:
            return SearchResult(
                x_best, v_best, max(ub_top, eff, capped_ub), nodes, evals
            )
        _, _, node = heapq.heappop(heap)
        nodes += 1
        if nodes > max_nodes:
            raise BisectionSearchError(
                f"bisection search exceeded {max_nodes} nodes (tol={tol:g})"
            )

        if not node.marked:
            cand, model_max = _model_argmax(f, node)
            val = _eval_active(f, cand, node.actives)
            evals += 1
            if val > v_best:
                v_best = val
                x_best = cand
            if node.ub - model_max <= 0.1 * tol and node.ub > max(v_best, cutoff_low):
                node.marked = True
                heapq.heappush(heap, (-node.ub, next(seq), node))
                continue

        if node.depth >= max_depth:
            capped_ub = max(capped_ub, node.ub)
            continue

        eff = max(v_best, cutoff_low)
        mid = 0.5 * (node.lo + node.hi)
        for mask in range(nsplit):
            clo = node.lo.copy()
            chi = mid.copy()
            for j in range(dim):
                if mask >> j & 1:
                    clo[j] = mid[j]
                    chi[j] = node.hi[j]
            actives, ub, val, cmid = _probe(f, clo, chi, node.actives, eff, refine)
            evals += 1
            if val > v_best:
                v_best = val
                x_best = cmid
                eff = max(v_best, cutoff_low)
            if ub > eff:
                heapq.heappush(
                    heap, (-ub, next(seq), _Node(clo, chi, node.depth + 1, actives, ub, val))
                )

    return SearchResult(x_best, v_best, max(v_best, cutoff_low, capped_ub), nodes, evals)


def minimise(
    f: KernelSum,
    domain: Cube,
    tol: float,
    cutoff_high: float = math.inf,
    max_nodes: int = 10_000_000,
    max_depth: int = 40,
) -> SearchResult:
    """Minimise ``f`` over ``domain``; mirror image of :func:`maximise`."""
    res = maximise(
        f.negated(),
        domain,
        tol,
        cutoff_low=-cutoff_high,
        max_nodes=max_nodes,
        max_depth=max_depth,
    )
    return SearchResult(res.point, -res.value, -res.bound, res.nodes, res.evaluations)
