"""Sampling density and node generation for weighted least squares.

The density is ``omega(x) = h(x) rho(x)`` with ``h = (1/m) sum_{j<=m} |eta_j|^2``.
Because every ``|eta_j|^2 rho`` integrates to one, ``omega`` is the uniform
mixture of these component densities, and each component is a product of
univariate densities. Nodes are drawn by picking a component uniformly and
then sampling each coordinate from its univariate factor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError, SamplingError
from .rng import as_stream
from .spectral import ProblemInstance, eval_basis

MAX_REJECTION_ATTEMPTS = 10**6
BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class SamplingDensity:
    instance: ProblemInstance
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"m must be positive, got {self.m}")
        if self.m > self.instance.M:
            raise ParameterError(f"m={self.m} exceeds the enumerated spectrum M={self.instance.M}")

    def h(self, x) -> np.ndarray:
        """Christoffel-type factor ``h_m`` at points of shape ``(N, d)``."""
        vals = eval_basis(self.instance.basis, np.arange(1, self.m + 1), x)
        return np.mean(np.abs(vals) ** 2, axis=1)

    def __call__(self, x) -> np.ndarray:
        return density_eval(self, x)


def density_eval(density: SamplingDensity, x) -> np.ndarray:
    """Sampling density ``h_m(x) rho(x)``; returns one value per point."""
    return density.h(x) * density.instance.basis.rho(x)


@dataclass(frozen=True)
class SampleSet:
    nodes: np.ndarray = field(repr=False)
    h_values: np.ndarray = field(repr=False)
    m: int
    seed: Optional[object] = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        h = np.array(self.h_values, dtype=float)
        nodes.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "h_values", h)

    @property
    def n(self) -> int:
        return int(self.nodes.shape[0])

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "m": self.m, "n": self.n, "nodes": self.nodes.tolist()},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str, instance: ProblemInstance) -> "SampleSet":
        """Restores a sample set; ``h`` values are recomputed from the nodes."""
        data = json.loads(text)
        nodes = np.asarray(data["nodes"], dtype=float).reshape(-1, instance.d)
        if nodes.shape[0] != data["n"]:
            raise ParameterError("node count does not match n")
        h = SamplingDensity(instance, data["m"]).h(nodes)
        return cls(nodes, h, data["m"], data.get("seed"))


def _sample_cosine(j: int, size: int, rng: np.random.Generator) -> np.ndarray:
    # density 1 + cos(2 pi j x) on [0, 1], CDF x + sin(2 pi j x) / (2 pi j)
    u = rng.random(size)
    lo = np.zeros(size)
    hi = np.ones(size)
    w = 2.0 * np.pi * j
    while np.max(hi - lo, initial=0.0) > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        below = mid + np.sin(w * mid) / w < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _sample_legendre(degree: int, size: int, rng: np.random.Generator, coord: int) -> np.ndarray:
    """Rejection from the uniform proposal, accepting with probability P_n(t)^2."""
    out = np.empty(size)
    pending = np.arange(size)
    attempts = 0
    while pending.size:
        attempts += 1
        if attempts > MAX_REJECTION_ATTEMPTS:
            raise SamplingError(
                f"Legendre rejection sampler exceeded {MAX_REJECTION_ATTEMPTS} attempts",
                component={"coordinate": coord, "degree": degree},
            )
        t = rng.uniform(-1.0, 1.0, pending.size)
        u = rng.random(pending.size)
        p = _legendre_standard(degree, t)
        ok = u < p * p
        out[pending[ok]] = t[ok]
        pending = pending[~ok]
    return out


def _legendre_standard(degree: int, t: np.ndarray) -> np.ndarray:
    # unnormalized P_n with |P_n| <= 1 on [-1, 1]
    prev, cur = np.ones_like(t), t
    if degree == 0:
        return prev
    for n in range(1, degree):
        prev, cur = cur, ((2 * n + 1) * t * cur - n * prev) / (n + 1)
    return cur


def _sample_univariate(kind: str, k: int, size: int, rng, coord: int) -> np.ndarray:
    if kind == "fourier" or k == 1:
        lo = -1.0 if kind == "legendre" else 0.0
        return rng.uniform(lo, 1.0, size)
    if kind == "cosine":
        return _sample_cosine(k - 1, size, rng)
    return _sample_legendre(k - 1, size, rng, coord)


def draw_nodes(density: SamplingDensity, n: int, stream, seed=None) -> SampleSet:
    """Draws ``n`` iid nodes from the mixture density.

    Args:
        density: Sampling density for ``m`` basis functions.
        n: Number of nodes.
        stream: A numpy Generator or an integer seed.
        seed: Identifier recorded in the sample set; defaults to ``stream``
            when that is an integer.
    """
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    if seed is None and not isinstance(stream, np.random.Generator):
        seed = int(stream)
    rng = as_stream(stream)
    inst = density.instance
    comp = rng.integers(1, density.m + 1, size=n)
    multi = inst.basis.index_map[comp - 1]
    nodes = np.empty((n, inst.d))
    for coord in range(inst.d):
        ks = multi[:, coord]
        for k in np.unique(ks):
            sel = ks == k
            nodes[sel, coord] = _sample_univariate(inst.basis.kind, int(k), int(sel.sum()), rng, coord)
    return SampleSet(nodes, density.h(nodes), density.m, seed)


@dataclass(frozen=True)
class DensityReport:
    integral: float
    deviation: float
    points_per_axis: int


def gauss_points(basis_kind: str, d: int, resolution: int):
    """Tensor Gauss-Legendre nodes and weights on the basis domain."""
    t, w = np.polynomial.legendre.leggauss(resolution)
    if basis_kind != "legendre":
        t, w = 0.5 * (t + 1.0), 0.5 * w
    grids = np.meshgrid(*([t] * d), indexing="ij")
    weights = np.ones_like(grids[0])
    for wg in np.meshgrid(*([w] * d), indexing="ij"):
        weights = weights * wg
    return np.stack([g.ravel() for g in grids], axis=1), weights.ravel()


def validate_density(density: SamplingDensity, resolution: int = 128) -> DensityReport:
    """Integrates the sampling density by tensor Gauss quadrature."""
    d = density.instance.d
    if d > 3:
        raise ParameterError("quadrature check supports d <= 3")
    pts, w = gauss_points(density.instance.basis.kind, d, resolution)
    total = float(np.sum(w * density_eval(density, pts)))
    return DensityReport(total, abs(total - 1.0), resolution)
