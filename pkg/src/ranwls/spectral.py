"""Spectral description of approximation problems.

A problem instance is a box domain with a product reference density, a
tensor-product orthonormal basis and a nonincreasing eigenvalue sequence.
Flat index ``k`` (1-based) addresses the ``k``-th largest eigenvalue and the
basis function attached to it; the attached multi-index lists one 1-based
univariate index per coordinate.

Functions:
    enumerate_eigenvalues: Largest product eigenvalues by best-first search.
    eval_basis: Evaluates basis functions at points.
    worst_case_error: Square root of the next eigenvalue.
    truncation_projection: Keeps the leading coefficients of a function.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ParameterError, TruncationError

BASIS_KINDS = ("fourier", "legendre", "cosine")
WEIGHT_KINDS = ("algebraic", "exponential")

_DOMAINS = {"fourier": (0.0, 1.0), "legendre": (-1.0, 1.0), "cosine": (0.0, 1.0)}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightFamily:
    """Product weights generating the eigenvalues.

    ``algebraic``: coordinate ``nu`` contributes ``1`` for univariate index 1
    and ``gamma_nu * k**(-2 alpha)`` for ``k >= 2``.
    ``exponential``: the eigenvalue is ``A * q**((k_1 - 1) + ... + (k_d - 1))``.
    """

    kind: str
    alpha: float = 1.0
    gammas: Optional[tuple] = None
    q: float = 0.5
    A: float = 1.0

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        if self.kind == "algebraic":
            if not self.alpha > 0.5:
                raise ParameterError(f"alpha must exceed 1/2, got {self.alpha}")
            if self.gammas is not None:
                object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
                # gamma <= 1 keeps the constant function on top of the ordering
                if any(not (0.0 < g <= 1.0) for g in self.gammas):
                    raise ParameterError(f"coordinate weights must lie in (0, 1], got {self.gammas}")
        else:
            if not 0.0 < self.q < 1.0:
                raise ParameterError(f"q must lie in (0, 1), got {self.q}")
            if not self.A >= 1.0:
                raise ParameterError(f"A must be at least 1, got {self.A}")

    def gamma(self, coord: int) -> float:
        if self.gammas is None:
            return 1.0
        if coord >= len(self.gammas):
            raise ParameterError(f"no coordinate weight given for coordinate {coord + 1}")
        return self.gammas[coord]

    def univariate(self, k, coord: int = 0):
        """Univariate factor for 1-based index ``k`` (scalar or array)."""
        k = np.asarray(k, dtype=float)
        if self.kind == "algebraic":
            tail = self.gamma(coord) * np.maximum(1.0, k) ** (-2.0 * self.alpha)
            return np.where(k <= 1, 1.0, tail)
        return self.q ** (k - 1)

    def eigenvalue(self, multi: Sequence[int]) -> float:
        """Product eigenvalue of one multi-index, multiplied left to right."""
        if self.kind == "exponential":
            return self.A * self.q ** int(sum(k - 1 for k in multi))
        value = 1.0
        for coord, k in enumerate(multi):
            value *= float(self.univariate(k, coord))
        return value

    def to_dict(self) -> dict:
        if self.kind == "algebraic":
            out = {"kind": "algebraic", "alpha": self.alpha}
            if self.gammas is not None:
                out["gammas"] = list(self.gammas)
            return out
        return {"kind": "exponential", "q": self.q, "A": self.A}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightFamily":
        data = dict(data)
        kind = data.pop("kind", None)
        allowed = {"algebraic": {"alpha", "gammas"}, "exponential": {"q", "A"}}
        if kind not in allowed:
            raise ConfigError(f"weights.kind must be one of {WEIGHT_KINDS}, got {kind!r}")
        extra = set(data) - allowed[kind]
        if extra:
            raise ConfigError(f"unexpected weight fields {sorted(extra)}")
        return cls(kind=kind, **data)


@dataclass(frozen=True)
class SpectralData:
    """The ``M`` largest eigenvalues, nonincreasing, with their multi-indices."""

    lambdas: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        order = np.asarray(self.order, dtype=np.int64)
        if lam.ndim != 1 or lam.size == 0:
            raise ParameterError("lambdas must be a nonempty 1-d sequence")
        if order.ndim == 1:
            order = order[:, None]
        if order.shape[0] != lam.size:
            raise ParameterError("order must hold one multi-index per eigenvalue")
        if np.any(lam <= 0):
            raise ParameterError("eigenvalues must be positive")
        if np.any(np.diff(lam) > 0):
            raise ParameterError("eigenvalues must be nonincreasing")
        object.__setattr__(self, "lambdas", _frozen(lam))
        object.__setattr__(self, "order", _frozen(order))

    @property
    def M(self) -> int:
        return int(self.lambdas.size)

    @property
    def d(self) -> int:
        return int(self.order.shape[1])

    @classmethod
    def from_sequence(cls, lambdas) -> "SpectralData":
        """Spectral data for a bare eigenvalue list (univariate index = flat index)."""
        lam = np.asarray(lambdas, dtype=float)
        return cls(lam, np.arange(1, lam.size + 1)[:, None])


def enumerate_eigenvalues(weights: WeightFamily, d: int, M: int) -> SpectralData:
    """Returns the ``M`` largest product eigenvalues over ``{1, 2, ...}^d``.

    Best-first expansion of the index lattice: the heap is keyed on
    ``(-lambda, multi_index)`` so equal eigenvalues leave in lexicographic
    order. Every univariate factor is nonincreasing in its index, hence a
    popped index never precedes one of its lattice predecessors.
    """
    if d < 1:
        raise ParameterError(f"dimension must be positive, got {d}")
    if M < 1:
        raise ParameterError(f"M must be positive, got {M}")
    if weights.gammas is not None and len(weights.gammas) < d:
        raise ParameterError(f"{len(weights.gammas)} coordinate weights given for d={d}")

    start = (1,) * d
    heap = [(-weights.eigenvalue(start), start)]
    seen = {start}
    lambdas, order = [], []
    while len(lambdas) < M:
        neg, multi = heapq.heappop(heap)
        lambdas.append(-neg)
        order.append(multi)
        for coord in range(d):
            nxt = multi[:coord] + (multi[coord] + 1,) + multi[coord + 1 :]
            if nxt not in seen:
                seen.add(nxt)
                heapq.heappush(heap, (-weights.eigenvalue(nxt), nxt))
    return SpectralData(np.array(lambdas), np.array(order, dtype=np.int64))


def fourier_frequency(k):
    """Maps 1-based univariate index to frequency 0, 1, -1, 2, -2, ..."""
    k = np.asarray(k, dtype=np.int64)
    return np.where(k % 2 == 0, k // 2, -(k // 2))


def legendre_values(kmax: int, t: np.ndarray) -> np.ndarray:
    """Orthonormal Legendre polynomials of degree ``0..kmax-1`` for density 1/2.

    Returns:
        Array of shape ``(len(t), kmax)``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty((t.size, kmax))
    out[:, 0] = 1.0
    if kmax > 1:
        out[:, 1] = t
    for n in range(1, kmax - 1):
        out[:, n + 1] = ((2 * n + 1) * t * out[:, n] - n * out[:, n - 1]) / (n + 1)
    out *= np.sqrt(2.0 * np.arange(kmax) + 1.0)
    return out


def univariate_values(kind: str, kmax: int, t: np.ndarray) -> np.ndarray:
    """Univariate basis values for indices ``1..kmax`` at points ``t``."""
    t = np.asarray(t, dtype=float).ravel()
    if kind == "legendre":
        return legendre_values(kmax, t)
    ks = np.arange(1, kmax + 1)
    if kind == "fourier":
        return np.exp(2j * np.pi * np.outer(t, fourier_frequency(ks)))
    if kind == "cosine":
        vals = np.sqrt(2.0) * np.cos(np.pi * np.outer(t, ks - 1))
        vals[:, 0] = 1.0
        return vals
    raise ParameterError(f"unknown basis kind {kind!r}")


@dataclass(frozen=True)
class BasisFamily:
    """Tensor-product orthonormal system with its flat index map.

    ``index_map[k-1]`` is the multi-index of flat index ``k``.
    """

    kind: str
    d: int
    index_map: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ParameterError(f"unknown basis kind {self.kind!r}")
        imap = np.asarray(self.index_map, dtype=np.int64)
        if imap.ndim != 2 or imap.shape[1] != self.d:
            raise ParameterError("index_map must have shape (M, d)")
        object.__setattr__(self, "index_map", _frozen(imap))

    @property
    def domain(self) -> tuple:
        return _DOMAINS[self.kind]

    @property
    def complex(self) -> bool:
        return self.kind == "fourier"

    @property
    def dtype(self):
        return np.complex128 if self.complex else np.float64

    def rho(self, x) -> np.ndarray:
        """Reference density at points of shape ``(N, d)``."""
        x = self.check_points(x)
        value = 2.0 ** (-self.d) if self.kind == "legendre" else 1.0
        return np.full(x.shape[0], value)

    def check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1) if x.size == self.d else x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[1] != self.d:
            raise DomainError(f"points must have {self.d} coordinates")
        lo, hi = self.domain
        if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"points must lie in [{lo}, {hi}]^{self.d}")
        return x


def eval_basis(basis: BasisFamily, indices, x) -> np.ndarray:
    """Evaluates basis functions ``eta_k`` at points.

    Args:
        basis: The basis family with its index map.
        indices: 1-based flat indices.
        x: A single point of shape ``(d,)`` or points of shape ``(N, d)``.

    Returns:
        Array of shape ``(N, len(indices))``; complex for the Fourier family.
    """
    x = basis.check_points(x)
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    M = basis.index_map.shape[0]
    if idx.size and (idx.min() < 1 or idx.max() > M):
        raise TruncationError(f"flat indices must lie in 1..{M}")
    multi = basis.index_map[idx - 1]
    out = np.ones((x.shape[0], idx.size), dtype=basis.dtype)
    for coord in range(basis.d):
        if idx.size == 0:
            break
        kmax = int(multi[:, coord].max())
        table = univariate_values(basis.kind, kmax, x[:, coord])
        out *= table[:, multi[:, coord] - 1]
    return out


def worst_case_error(spectral: SpectralData, n: int) -> float:
    """Smallest worst-case error achievable with ``n`` linear functionals."""
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if n + 1 > spectral.M:
        raise TruncationError(f"need eigenvalue {n + 1} but only {spectral.M} are enumerated")
    return float(np.sqrt(spectral.lambdas[n]))


@dataclass(frozen=True)
class CoefficientFunction:
    """A function given by its coefficients ``a_k = <f, eta_k>`` in ``G_d``."""

    support: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        support = np.atleast_1d(np.asarray(self.support, dtype=np.int64))
        coeffs = np.atleast_1d(np.asarray(self.coeffs))
        if not np.iscomplexobj(coeffs):
            coeffs = coeffs.astype(float)
        if support.shape != coeffs.shape or support.ndim != 1:
            raise ParameterError("support and coeffs must be 1-d of equal length")
        if support.size and support.min() < 1:
            raise ParameterError("flat indices are 1-based")
        if np.unique(support).size != support.size:
            raise ParameterError("support indices must be distinct")
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @classmethod
    def from_dict(cls, mapping: dict) -> "CoefficientFunction":
        keys = sorted(mapping)
        return cls(np.array(keys, dtype=np.int64), np.array([mapping[k] for k in keys]))

    @classmethod
    def mode(cls, k: int, amplitude=1.0) -> "CoefficientFunction":
        return cls(np.array([k]), np.array([amplitude]))

    @property
    def max_index(self) -> int:
        return int(self.support.max()) if self.support.size else 0

    def g_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def f_norm_sq(self, spectral: SpectralData) -> float:
        if self.max_index > spectral.M:
            raise TruncationError("support exceeds the enumerated spectrum")
        lam = spectral.lambdas[self.support - 1]
        return float(np.sum(np.abs(self.coeffs) ** 2 / lam))

    def dense(self, length: int) -> np.ndarray:
        """Coefficient vector over flat indices ``1..length``."""
        if self.max_index > length:
            raise TruncationError(f"support reaches {self.max_index} > {length}")
        out = np.zeros(length, dtype=self.coeffs.dtype)
        out[self.support - 1] = self.coeffs
        return out

    def __call__(self, basis: BasisFamily, x) -> np.ndarray:
        """Point values of the function."""
        if self.support.size == 0:
            return np.zeros(basis.check_points(x).shape[0], dtype=basis.dtype)
        return eval_basis(basis, self.support, x) @ self.coeffs


def truncation_projection(f: CoefficientFunction, m: int) -> CoefficientFunction:
    """Optimal projection onto the span of the first ``m`` basis functions."""
    if m < 0:
        raise ParameterError("m must be nonnegative")
    keep = f.support <= m
    return CoefficientFunction(f.support[keep], f.coeffs[keep])


@dataclass(frozen=True)
class ProblemInstance:
    """Basis, weights, dimension and truncation length bundled together."""

    basis: BasisFamily
    weights: WeightFamily
    spectral: SpectralData

    @classmethod
    def create(cls, basis_kind: str, weights: WeightFamily, d: int, M: int) -> "ProblemInstance":
        spectral = enumerate_eigenvalues(weights, d, M)
        return cls(BasisFamily(basis_kind, d, spectral.order), weights, spectral)

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def M(self) -> int:
        return self.spectral.M

    def to_config(self) -> dict:
        return {
            "basis": {"kind": self.basis.kind},
            "weights": self.weights.to_dict(),
            "d": self.d,
            "M": self.M,
        }

    @classmethod
    def from_config(cls, config: dict) -> "ProblemInstance":
        """Builds an instance from ``{basis: {kind}, weights: {...}, d, M}``."""
        try:
            basis = config["basis"]
            weights = config["weights"]
            d = config["d"]
            M = config["M"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"problem config is missing field {exc}") from None
        if not isinstance(basis, dict) or basis.get("kind") not in BASIS_KINDS:
            raise ConfigError(f"basis.kind must be one of {BASIS_KINDS}")
        if not isinstance(d, int) or not isinstance(M, int) or isinstance(d, bool):
            raise ConfigError("d and M must be integers")
        try:
            return cls.create(basis["kind"], WeightFamily.from_dict(weights), d, M)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
