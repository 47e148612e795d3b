"""Discrete measures, spikes and axis-aligned boxes.

The optimisation variable throughout the package is a finitely supported
measure sum_i w_i * delta(x_i) with weights w_i >= 0 at the points where the
outer solvers read it.  Weights may transiently become negative inside inner
subproblem iterations and inertial extrapolation, so the container itself does
not enforce a sign.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Cube",
    "Spike",
    "DiscreteMeasure",
    "radon_norm",
    "prune",
    "merge_spikes",
]


def _as_point(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"expected a point, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Cube:
    """Axis-aligned box [lower_1, upper_1] x ... x [lower_d, upper_d].

    Degenerate boxes (lower == upper along some axis) are allowed; they arise
    as leaves of the bisection search.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_point(self.lower)
        hi = _as_point(self.upper)
        if lo.shape != hi.shape:
            raise ValueError("lower/upper dimension mismatch")
        if np.any(lo > hi):
            raise ValueError("cube has lower > upper")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, atol: float = 0.0) -> bool:
        p = _as_point(x)
        return bool(np.all(p >= self.lower - atol) and np.all(p <= self.upper + atol))

    def split(self) -> list[Cube]:
        """Halve along every axis, producing 2^dim children covering self."""
        mid = self.midpoint
        children = []
        for mask in range(1 << self.dim):
            lo = self.lower.copy()
            hi = mid.copy()
            for j in range(self.dim):
                if mask >> j & 1:
                    lo[j] = mid[j]
                    hi[j] = self.upper[j]
            children.append(Cube(lo, hi))
        return children

    @staticmethod
    def interval(lo: float, hi: float) -> Cube:
        return Cube(np.array([lo]), np.array([hi]))

    @staticmethod
    def box(lo: Sequence[float], hi: Sequence[float]) -> Cube:
        return Cube(np.asarray(lo, float), np.asarray(hi, float))


@dataclass(frozen=True)
class Spike:
    """One weighted Dirac delta."""

    weight: float
    location: np.ndarray

    def __post_init__(self):
        loc = _as_point(self.location)
        loc.flags.writeable = False
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "weight", float(self.weight))


class DiscreteMeasure:
    """Finite linear combination of Dirac spikes, stored as flat arrays.

    ``locations`` has shape (n, dim) and ``weights`` shape (n,).  Instances are
    value-like: operations return new measures and the stored arrays are
    read-only.
    """

    __slots__ = ("locations", "weights")

    def __init__(self, locations, weights):
        locs = np.asarray(locations, dtype=float)
        w = np.asarray(weights, dtype=float)
        if locs.ndim == 1:
            locs = locs[:, None]
        if locs.ndim != 2:
            raise ValueError(f"locations must be (n, dim), got {locs.shape}")
        if w.shape != (locs.shape[0],):
            raise ValueError("weights length does not match locations")
        locs = np.ascontiguousarray(locs)
        w = np.ascontiguousarray(w)
        locs.flags.writeable = False
        w.flags.writeable = False
        self.locations = locs
        self.weights = w

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> DiscreteMeasure:
        return cls(np.empty((0, dim)), np.empty(0))

    @classmethod
    def from_spikes(cls, spikes: Sequence[Spike]) -> DiscreteMeasure:
        if not spikes:
            raise ValueError("cannot infer dimension from an empty spike list; use zero()")
        return cls(
            np.stack([s.location for s in spikes]),
            np.array([s.weight for s in spikes]),
        )

    # -- basic queries ------------------------------------------------------

    def __len__(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def spikes(self) -> Iterator[Spike]:
        for w, x in zip(self.weights, self.locations):
            yield Spike(w, x.copy())

    def radon_norm(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    # -- derived measures ---------------------------------------------------

    def with_weights(self, weights) -> DiscreteMeasure:
        return DiscreteMeasure(self.locations, weights)

    def prune(self) -> DiscreteMeasure:
        keep = self.weights != 0.0
        if np.all(keep):
            return self
        return DiscreteMeasure(self.locations[keep], self.weights[keep])

    def scaled(self, factor: float) -> DiscreteMeasure:
        return DiscreteMeasure(self.locations, factor * self.weights)

    def __add__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return DiscreteMeasure(
            np.concatenate([self.locations, other.locations]),
            np.concatenate([self.weights, other.weights]),
        )

    # -- serialisation ------------------------------------------------------

    def to_json_obj(self) -> list[dict]:
        return [
            {"weight": float(w), "location": [float(c) for c in x]}
            for w, x in zip(self.weights, self.locations)
        ]

    @classmethod
    def from_json_obj(cls, obj: list[dict], dim: int | None = None) -> DiscreteMeasure:
        if not obj:
            if dim is None:
                raise ValueError("need dim to decode an empty measure")
            return cls.zero(dim)
        locs = np.array([rec["location"] for rec in obj], dtype=float)
        w = np.array([rec["weight"] for rec in obj], dtype=float)
        return cls(locs, w)

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n={len(self)}, dim={self.dim}, |mu|={self.radon_norm():.4g})"


def radon_norm(mu: DiscreteMeasure) -> float:
    """Total variation norm, sum |w_i|."""
    return mu.radon_norm()


def prune(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Drop spikes whose weight is exactly zero.  Order is preserved."""
    return mu.prune()


def merge_spikes(
    mu: DiscreteMeasure,
    radius: float,
    accept: Callable[[DiscreteMeasure], bool] | None = None,
) -> DiscreteMeasure:
    """Greedily merge spike pairs closer than ``radius`` in the max norm.

    A pair (i, j) is replaced by a single spike of weight w_i + w_j at the
    weighted barycentre (w_i x_i + w_j x_j) / (w_i + w_j).  The candidate
    measure is adopted only if ``accept`` approves it (default: always).
    Pairs of exactly cancelling weights are skipped since the barycentre is
    undefined.  The scan runs over index pairs (i < j) in order and restarts
    after every accepted merge, so the result is deterministic; the spike
    count strictly decreases on each accepted merge, which bounds the loop.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    current = mu
    merged = True
    while merged and len(current) > 1:
        merged = False
        locs = current.locations
        w = current.weights
        n = len(current)
        for i in range(n):
            for j in range(i + 1, n):
                if np.max(np.abs(locs[i] - locs[j])) > radius:
                    continue
                ws = w[i] + w[j]
                if ws == 0.0:
                    continue
                bary = (w[i] * locs[i] + w[j] * locs[j]) / ws
                keep = np.ones(n, bool)
                keep[j] = False
                new_locs = locs[keep].copy()
                new_w = w[keep].copy()
                new_locs[i] = bary
                new_w[i] = ws
                candidate = DiscreteMeasure(new_locs, new_w)
                if accept is None or accept(candidate):
                    current = candidate
                    merged = True
                    break
            if merged:
                break
    return current
