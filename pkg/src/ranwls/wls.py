"""Weighted least squares from random nodes.

Rows of the design matrix are the basis values at each node divided by
``sqrt(h_m(node))``. A sample set is used only if the empirical Gram matrix
``H = L* L / n`` lies within spectral distance 1/2 of the identity; otherwise
it is discarded and redrawn, which realizes the conditional law of the nodes
given that event.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    AcceptanceError,
    ContractError,
    DegenerateNodeError,
    InvariantViolation,
    ParameterError,
    TruncationError,
)
from .rng import as_stream
from .sampler import SampleSet, SamplingDensity, draw_nodes
from .spectral import CoefficientFunction, ProblemInstance, eval_basis

ACCEPT_THRESHOLD = 0.5
DEFAULT_MAX_RETRIES = 100


@dataclass(frozen=True)
class DesignMatrices:
    L: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    deviation: float

    @property
    def n(self) -> int:
        return int(self.L.shape[0])

    @property
    def accepted(self) -> bool:
        return self.deviation <= ACCEPT_THRESHOLD


@dataclass(frozen=True)
class WlsModel:
    m: int
    coeffs: np.ndarray
    deviation: float
    retries: int
    sample: SampleSet = field(repr=False)
    cond: float = float("nan")

    def approximant(self) -> CoefficientFunction:
        return CoefficientFunction(np.arange(1, self.m + 1), self.coeffs)

    def to_json(self) -> str:
        c = np.asarray(self.coeffs)
        coeffs = {"re": c.real.tolist(), "im": c.imag.tolist()} if np.iscomplexobj(c) else c.tolist()
        return json.dumps(
            {
                "m": self.m,
                "n": self.sample.n,
                "coeffs": coeffs,
                "deviation": self.deviation,
                "retries": self.retries,
                "cond": self.cond,
                "seed": self.sample.seed,
            },
            sort_keys=True,
        )

    @staticmethod
    def coeffs_from_json(text: str) -> np.ndarray:
        data = json.loads(text)["coeffs"]
        if isinstance(data, dict):
            return np.asarray(data["re"]) + 1j * np.asarray(data["im"])
        return np.asarray(data, dtype=float)


def assemble(instance: ProblemInstance, m: int, X: SampleSet) -> DesignMatrices:
    """Builds the scaled design matrix, Gram matrix and spectral deviation."""
    if X.m != m:
        raise ParameterError(f"sample set was drawn for m={X.m}, not m={m}")
    if not 1 <= m <= X.n:
        raise ParameterError(f"need 1 <= m <= n, got m={m}, n={X.n}")
    h = X.h_values
    if np.any(h <= 0):
        bad = int(np.flatnonzero(h <= 0)[0])
        raise DegenerateNodeError(f"h vanishes at node {bad}: {X.nodes[bad].tolist()}")
    L = eval_basis(instance.basis, np.arange(1, m + 1), X.nodes) / np.sqrt(h)[:, None]
    H = (L.conj().T @ L) / X.n
    H = 0.5 * (H + H.conj().T)
    eig = np.linalg.eigvalsh(H - np.eye(m))
    return DesignMatrices(L, H, float(np.max(np.abs(eig))))


def _draw_accepted(instance, m, n, stream, max_retries, seed=None):
    if m < 1 or n < m:
        raise ParameterError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = as_stream(stream)
    if seed is None and not isinstance(stream, np.random.Generator):
        seed = int(stream)
    density = SamplingDensity(instance, m)
    retries = 0
    while True:
        X = draw_nodes(density, n, rng, seed=seed)
        mats = assemble(instance, m, X)
        if mats.accepted:
            return X, retries, mats
        retries += 1
        if retries > max_retries:
            raise AcceptanceError(
                f"no accepted sample set after {retries} draws (m={m}, n={n}); increase n",
                last_deviation=mats.deviation,
                retries=retries,
            )


def draw_accepted(instance: ProblemInstance, m: int, n: int, stream, max_retries: int = DEFAULT_MAX_RETRIES, seed=None):
    """Redraws ``n`` nodes until the spectral deviation is at most 1/2.

    Returns:
        ``(sample_set, retries)`` where ``retries`` counts discarded sets.
    """
    X, retries, _ = _draw_accepted(instance, m, n, stream, max_retries, seed)
    return X, retries


def _lstsq_qr(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    Q, R = scipy.linalg.qr(L, mode="economic")
    return scipy.linalg.solve_triangular(R, Q.conj().T @ rhs)


def _cond(H: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(H)
    return float(np.sqrt(ev[-1] / ev[0]))


def solve(instance: ProblemInstance, m: int, X: SampleSet, samples, retries: int = 0, matrices=None) -> WlsModel:
    """Weighted least squares coefficients for samples ``f(x^i)``.

    Raises:
        ContractError: If ``X`` does not pass the spectral acceptance test.
    """
    mats = matrices if matrices is not None else assemble(instance, m, X)
    if not mats.accepted:
        raise ContractError(f"sample set not accepted: deviation {mats.deviation:.4g} > 1/2")
    samples = np.asarray(samples)
    if samples.shape[0] != X.n:
        raise ParameterError(f"expected {X.n} samples, got {samples.shape[0]}")
    f_tilde = samples / np.sqrt(X.h_values).reshape((-1,) + (1,) * (samples.ndim - 1))
    coeffs = _lstsq_qr(mats.L, f_tilde)
    return WlsModel(m, coeffs, mats.deviation, retries, X, _cond(mats.H))


def inverse_norm_bound_check(matrices: DesignMatrices, strict: bool = False):
    """Checks ``||(L* L)^{-1}|| <= 2/n`` for an accepted design.

    Returns:
        ``(holds, value)`` with ``value = ||(L* L)^{-1}||``.
    """
    if not matrices.accepted:
        raise ContractError("bound applies only to accepted designs")
    gram = matrices.L.conj().T @ matrices.L
    smallest = float(np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))[0])
    value = 1.0 / smallest
    holds = value <= 2.0 / matrices.n
    if strict and not holds:
        raise InvariantViolation(f"||(L*L)^-1|| = {value:.6g} exceeds 2/n = {2.0 / matrices.n:.6g}")
    return holds, value


def g_error_sq(M: int, m: int, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared coefficient-space error; ``a`` is ``(M, ...)``, ``c`` is ``(m, ...)``."""
    head = np.sum(np.abs(a[:m] - c) ** 2, axis=0)
    tail = np.sum(np.abs(a[m:M]) ** 2, axis=0)
    return head + tail


def g_error(instance: ProblemInstance, model: WlsModel, f: CoefficientFunction) -> float:
    """Exact ``G``-norm of ``f - S f`` from coefficients."""
    if f.max_index > instance.M:
        raise TruncationError(f"function support reaches {f.max_index} > M={instance.M}")
    length = max(instance.M, model.m)
    a = f.dense(length)
    return float(np.sqrt(g_error_sq(length, model.m, a, np.asarray(model.coeffs))))
