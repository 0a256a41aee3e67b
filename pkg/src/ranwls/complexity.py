"""Information complexity from eigenvalues and the transfer bounds.

``TRUNCATED`` (``math.inf``) marks a complexity that needs eigenvalues beyond
the enumerated range; bounds evaluated at it stay ``TRUNCATED``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError
from .spectral import SpectralData

TRUNCATED = math.inf

SQRT2 = math.sqrt(2.0)
LOG_192_SQRT2 = math.log(192.0 * SQRT2)
K_LOG = 96.0 * SQRT2
CRITERIA = ("ABS", "NOR")


def m_of_n(n: int, delta: float) -> int:
    """Basis size usable with ``n`` nodes at failure probability ``delta``."""
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    return int(math.floor(n / (48.0 * (SQRT2 * math.log(2.0 * n) - math.log(delta)))))


def m_of_n_exp(n: int) -> int:
    """The special case ``delta = 2**-sqrt(2)``, written as ``n / (48 sqrt2 ln 4n)``."""
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    return int(math.floor(n / (48.0 * SQRT2 * math.log(4.0 * n))))


DELTA_EXP = 2.0 ** (-SQRT2)


def a_delta(delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(1.0 + 1.0 / (12.0 * math.log(1.0 / delta))) / math.sqrt(1.0 - delta)


def _criterion(criterion: str) -> str:
    c = str(criterion).upper()
    if c not in CRITERIA:
        raise ParameterError(f"criterion must be ABS or NOR, got {criterion!r}")
    return c


def cri(spectral: SpectralData, criterion: str) -> float:
    return 1.0 if _criterion(criterion) == "ABS" else math.sqrt(spectral.lambdas[0])


def _scaled_lambdas(spectral: SpectralData, criterion: str) -> np.ndarray:
    lam = spectral.lambdas
    return lam if _criterion(criterion) == "ABS" else lam / lam[0]


def n_wor(spectral: SpectralData, eps: float, criterion: str = "ABS"):
    """Smallest ``n`` with ``sqrt(lambda_{n+1}) <= eps * CRI``.

    NOR is evaluated as ABS on the spectrum divided by ``lambda_1``.

    Returns:
        An ``int``, or ``TRUNCATED`` when even ``n = M - 1`` misses the target.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    roots = np.sqrt(_scaled_lambdas(spectral, criterion))
    # roots is nonincreasing, so the predicate roots <= eps is monotone
    lo, hi = 0, roots.size
    while lo < hi:
        mid = (lo + hi) // 2
        if roots[mid] <= eps:
            hi = mid
        else:
            lo = mid + 1
    return lo if lo < roots.size else TRUNCATED


def _ceil(x: float):
    return TRUNCATED if math.isinf(x) else int(math.ceil(x))


def bound_log(x) -> float:
    """Randomized standard-information bound from ``n_wor(eps / 4)``."""
    if math.isinf(x):
        return TRUNCATED
    if x < 0:
        raise ParameterError("complexity must be nonnegative")
    return _ceil(K_LOG * (x + 1) * (math.log(x + 1) + LOG_192_SQRT2))


def _check_small_delta(delta: float) -> None:
    if not 0.0 < delta < math.exp(-1.0):
        raise ParameterError(f"delta must lie in (0, 1/e) so that ln ln(1/delta) is defined, got {delta}")


def bound_log_delta(x, delta: float):
    """Randomized bound from ``n_wor(eps / A_delta)``."""
    _check_small_delta(delta)
    if math.isinf(x):
        return TRUNCATED
    if x < 0:
        raise ParameterError("complexity must be nonnegative")
    L = math.log(1.0 / delta)
    return _ceil(48.0 * (4.0 * (math.log(48.0) + math.log(L) + math.log(x + 1)) + L) * (x + 1))


def _sup_log_over_power(scale: float, offset: float, omega: float) -> float:
    """``sup_{x >= 1} scale (offset + ln x) / x**omega`` in closed form.

    The derivative vanishes at ``ln x = 1/omega - offset``; below ``x = 1``
    the supremum sits at the boundary.
    """
    if not omega > 0:
        raise ParameterError(f"omega must be positive, got {omega}")
    log_x = max(0.0, 1.0 / omega - offset)
    return scale * (offset + log_x) * math.exp(-omega * log_x)


def c_omega(omega: float) -> float:
    return _sup_log_over_power(K_LOG, LOG_192_SQRT2, omega)


def _offset_omega_delta(delta: float) -> float:
    L = math.log(1.0 / delta)
    return math.log(48.0) + math.log(L) + L / 4.0


def c_omega_delta(omega: float, delta: float) -> float:
    # 48 (4 (ln48 + lnln(1/d) + ln x) + ln(1/d)) = 192 (offset + ln x)
    _check_small_delta(delta)
    return _sup_log_over_power(192.0, _offset_omega_delta(delta), omega)


def bound_power(x, omega: float):
    """``C_omega (x + 1)^(1 + omega)``, the power form of :func:`bound_log`."""
    if math.isinf(x):
        return TRUNCATED
    return _ceil(c_omega(omega) * (x + 1) ** (1.0 + omega))


def bound_power_delta(x, omega: float, delta: float):
    """``C_omega,delta (x + 1)^(1 + omega)``, the power form of :func:`bound_log_delta`."""
    c = c_omega_delta(omega, delta)
    if math.isinf(x):
        return TRUNCATED
    return _ceil(c * (x + 1) ** (1.0 + omega))


@dataclass(frozen=True)
class ComplexityTable:
    """Worst-case complexities over an ``(eps, d)`` grid plus the transfer bounds.

    ``n_wor[i, j]`` belongs to ``d_grid[i]`` and ``eps_grid[j]``; the quarter
    and scaled arrays hold ``n_wor(eps / 4)`` and ``n_wor(eps / A_delta)``.
    """

    eps_grid: tuple
    d_grid: tuple
    criterion: str
    delta: float
    omega: float
    n_wor: np.ndarray = field(repr=False)
    n_wor_quarter: np.ndarray = field(repr=False)
    n_wor_scaled: np.ndarray = field(repr=False)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.n_wor)))

    def rows(self) -> list:
        out = []
        for i, d in enumerate(self.d_grid):
            for j, eps in enumerate(self.eps_grid):
                xq = float(self.n_wor_quarter[i, j])
                xs = float(self.n_wor_scaled[i, j])
                out.append(
                    {
                        "eps": eps,
                        "d": d,
                        "n_wor": _as_count(self.n_wor[i, j]),
                        "n_wor_quarter": _as_count(xq),
                        "n_wor_scaled": _as_count(xs),
                        "bound_log": bound_log(xq),
                        "bound_log_delta": bound_log_delta(xs, self.delta),
                        "bound_power": bound_power(xq, self.omega),
                        "bound_power_delta": bound_power_delta(xs, self.omega, self.delta),
                    }
                )
        return out


def _as_count(x):
    x = float(x)
    return TRUNCATED if math.isinf(x) else int(x)


def complexity_table(
    spectra: Mapping[int, SpectralData],
    eps_grid: Sequence[float],
    criterion: str = "ABS",
    delta: float = 0.01,
    omega: float = 0.5,
) -> ComplexityTable:
    """Evaluates ``n_wor`` for every grid cell; ``spectra`` maps ``d`` to its spectrum."""
    _check_small_delta(delta)
    if not omega > 0:
        raise ParameterError(f"omega must be positive, got {omega}")
    criterion = _criterion(criterion)
    eps_grid = tuple(float(e) for e in eps_grid)
    d_grid = tuple(sorted(spectra))
    if not eps_grid or not d_grid:
        raise ParameterError("grids must be nonempty")
    ad = a_delta(delta)
    shape = (len(d_grid), len(eps_grid))
    base, quarter, scaled = np.empty(shape), np.empty(shape), np.empty(shape)
    for i, d in enumerate(d_grid):
        for j, eps in enumerate(eps_grid):
            base[i, j] = n_wor(spectra[d], eps, criterion)
            quarter[i, j] = n_wor(spectra[d], eps / 4.0, criterion)
            scaled[i, j] = n_wor(spectra[d], eps / ad, criterion)
    return ComplexityTable(eps_grid, d_grid, criterion, delta, omega, base, quarter, scaled)
