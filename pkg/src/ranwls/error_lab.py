"""Monte Carlo experiments for the randomized error and the Gram concentration.

Every replication ``r`` draws from ``substream(seed, r)``; results are
gathered in replication order, so a run is reproducible whatever the number
of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .complexity import DELTA_EXP, m_of_n, m_of_n_exp
from .errors import ParameterError
from .sampler import SamplingDensity, draw_nodes
from .spectral import CoefficientFunction, ProblemInstance, eval_basis, worst_case_error
from .wls import DEFAULT_MAX_RETRIES, _draw_accepted, _lstsq_qr, assemble, g_error_sq

F_NORM_SLACK = 1e-12


@dataclass(frozen=True)
class ErrorEstimate:
    label: str
    mean_sq: float
    std_err: float
    R: int
    bound_sq: float
    n: int
    m: int
    delta: float
    retries_mean: float

    @property
    def within_bound(self) -> bool:
        """Statistical acceptance at three standard errors."""
        return self.mean_sq <= self.bound_sq + 3.0 * self.std_err

    def row(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ConcentrationReport:
    empirical_prob: float
    bound: float
    raw_bound: float
    n: int
    m: int
    t: float
    R: int

    @property
    def holds(self) -> bool:
        return self.empirical_prob <= self.bound


def mean_and_stderr(values) -> tuple:
    """Mean with compensated summation and the standard error of the mean."""
    v = np.asarray(values, dtype=float)
    R = v.size
    mean = math.fsum(v) / R
    if R < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2) / (R - 1)
    return mean, math.sqrt(var / R)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def randomized_error_bound(spectral, n: int, delta: float) -> float:
    """``(1 + 4m/n)^(1/2) (1 - delta)^(-1/2) sqrt(lambda_{m+1})``."""
    m = m_of_n(n, delta)
    if m < 1:
        raise ParameterError(f"n={n} gives m=0 at delta={delta}; increase n or delta")
    return math.sqrt((1.0 + 4.0 * m / n) / (1.0 - delta)) * worst_case_error(spectral, m)


def battery_functions(instance: ProblemInstance, m: int, seed: int) -> list:
    """Pure modes at and beyond ``m`` plus one random unit-F-norm function.

    Returns:
        List of ``(label, CoefficientFunction)``.
    """
    M = instance.M
    lam = instance.spectral.lambdas
    ks = []
    for k in (1, m, m + 1, m + 2, 2 * m, M):
        if 1 <= k <= M and k not in ks:
            ks.append(k)
    battery = [(f"mode_{k}", CoefficientFunction.mode(k, math.sqrt(lam[k - 1]))) for k in ks]
    g = rngmod.substream(seed, 0, rngmod.TEST_FUNCTIONS)
    z = g.standard_normal(M)
    if instance.basis.complex:
        z = z + 1j * g.standard_normal(M)
    a = np.sqrt(lam) * z / np.linalg.norm(z)
    battery.append(("random", CoefficientFunction(np.arange(1, M + 1), a)))
    return battery


def _check_unit_ball(instance, fs):
    for f in fs:
        if f.f_norm_sq(instance.spectral) > (1.0 + F_NORM_SLACK) ** 2:
            raise ParameterError("test functions must lie in the unit ball of F")


def _battery_replications(instance, fs, n, m, R, seed, threads, max_retries):
    """Per-replication squared errors, shape ``(R, len(fs))``, and retry counts."""
    M = instance.M
    A = np.stack([f.dense(M) for f in fs], axis=1)  # (M, F)
    union = np.flatnonzero(np.any(A != 0, axis=1)) + 1

    def one(r):
        g = rngmod.substream(seed, r)
        X, retries, mats = _draw_accepted(instance, m, n, g, max_retries, seed=[seed, r])
        if union.size:
            samples = eval_basis(instance.basis, union, X.nodes) @ A[union - 1]
        else:
            samples = np.zeros((n, len(fs)))
        c = _lstsq_qr(mats.L, samples / np.sqrt(X.h_values)[:, None])
        return g_error_sq(M, m, A, c), retries

    results = _map(one, range(R), threads)
    errs = np.array([e for e, _ in results]).reshape(R, len(fs))
    retries = np.array([t for _, t in results], dtype=float)
    return errs, retries


def randomized_error_battery(
    instance: ProblemInstance,
    fs: Sequence,
    n: int,
    delta: float,
    R: int,
    seed: int,
    threads: int = 1,
    max_retries: int = DEFAULT_MAX_RETRIES,
    labels: Sequence[str] = None,
    m: int = None,
) -> list:
    """Estimates ``E ||f - S f||^2`` for several functions from shared draws.

    All functions see the same accepted node sets, so their estimates are
    correlated with each other but each one is an unbiased Monte Carlo mean.
    ``m`` defaults to the size given by ``n`` and ``delta``.
    """
    if R < 1:
        raise ParameterError("R must be positive")
    if m is None:
        m = m_of_n(n, delta)
    if m < 1:
        raise ParameterError(f"n={n} gives m=0 at delta={delta}; increase n or delta")
    fs = list(fs)
    labels = list(labels) if labels is not None else [f"f{i}" for i in range(len(fs))]
    _check_unit_ball(instance, fs)
    bound_sq = (1.0 + 4.0 * m / n) / (1.0 - delta) * worst_case_error(instance.spectral, m) ** 2
    errs, retries = _battery_replications(instance, fs, n, m, R, seed, threads, max_retries)
    retries_mean = math.fsum(retries) / R
    out = []
    for j, label in enumerate(labels):
        mean, se = mean_and_stderr(errs[:, j])
        out.append(ErrorEstimate(label, mean, se, R, bound_sq, n, m, delta, retries_mean))
    return out


def randomized_error_mc(instance, f, n, delta, R, seed, threads=1, max_retries=DEFAULT_MAX_RETRIES) -> ErrorEstimate:
    """Single-function version of :func:`randomized_error_battery`."""
    return randomized_error_battery(instance, [f], n, delta, R, seed, threads, max_retries, ["f"])[0]


def error_curve(instance, n_grid, delta, R, seed, threads=1, max_retries=DEFAULT_MAX_RETRIES) -> list:
    """Runs the test battery at every ``n``; grid points with ``m = 0`` are skipped."""
    rows = []
    for n in n_grid:
        m = m_of_n(n, delta)
        if m < 1:
            continue
        battery = battery_functions(instance, m, seed)
        labels = [lab for lab, _ in battery]
        rows.extend(
            randomized_error_battery(
                instance, [f for _, f in battery], n, delta, R, seed, threads, max_retries, labels
            )
        )
    return rows


def concentration_bound(n: int, m: int, t: float) -> float:
    """``(2n)^sqrt2 exp(-n t^2 / (12 m))``, possibly above one."""
    return (2.0 * n) ** math.sqrt(2.0) * math.exp(-n * t * t / (12.0 * m))


def deviation_samples(instance, m, n, R, seed, threads=1) -> np.ndarray:
    """Spectral deviations of ``R`` unconditioned sample sets."""
    density = SamplingDensity(instance, m)

    def one(r):
        X = draw_nodes(density, n, rngmod.substream(seed, r), seed=[seed, r])
        return assemble(instance, m, X).deviation

    return np.array(_map(one, range(R), threads))


def _report(devs, n, m, t):
    if not 0.0 < t < 1.0:
        raise ParameterError(f"t must lie in (0, 1), got {t}")
    raw = concentration_bound(n, m, t)
    return ConcentrationReport(float(np.mean(devs > t)), min(1.0, raw), raw, n, m, t, devs.size)


def concentration_experiment(instance, m, n, t, R, seed, threads=1) -> ConcentrationReport:
    """Fraction of draws whose deviation exceeds ``t`` next to the tail bound."""
    if not 0.0 < t < 1.0:
        raise ParameterError(f"t must lie in (0, 1), got {t}")
    return _report(deviation_samples(instance, m, n, R, seed, threads), n, m, t)


def concentration_grid(instance, ms, ns, ts, R, seed, threads=1) -> list:
    """Concentration reports over a grid; thresholds share one set of draws per ``(m, n)``."""
    out = []
    for m in ms:
        for n in ns:
            devs = deviation_samples(instance, m, n, R, seed, threads)
            out.extend(_report(devs, n, m, t) for t in ts)
    return out


@dataclass(frozen=True)
class DecayRow:
    n: int
    m: int
    rms: float
    rms_std_err: float
    bound_internal: float
    bound_decay: float
    retries_mean: float

    @property
    def within_internal(self) -> bool:
        return self.rms <= self.bound_internal + 3.0 * self.rms_std_err

    @property
    def within_decay(self) -> bool:
        return self.rms <= self.bound_decay + 3.0 * self.rms_std_err


@dataclass(frozen=True)
class DecayReport:
    q: float
    A: float
    q2: float
    rows: tuple

    @property
    def all_within(self) -> bool:
        return all(r.within_internal for r in self.rows)

    @property
    def curves_ordered(self) -> bool:
        return all(r.bound_decay >= r.bound_internal for r in self.rows)


def decay_constants(spectral, q_err: float) -> float:
    """Smallest ``A >= 1`` with ``sqrt(lambda_{n+1}/lambda_1) <= A q_err^(n+1)`` on the enumerated range."""
    ratio = np.sqrt(spectral.lambdas / spectral.lambdas[0])
    k = np.arange(1, spectral.M + 1)
    return float(max(1.0, np.max(ratio / q_err**k)))


def exp_decay_check(instance: ProblemInstance, n_grid, seed: int, R: int = 200, threads: int = 1,
                    max_retries: int = DEFAULT_MAX_RETRIES) -> DecayReport:
    """Randomized error against ``4 e_wor(m)`` and the exponential-decay curve.

    The error of eigenvalues ``A q^(k-1)`` decays like ``sqrt(q)^n``, so the
    curve uses ``q_err = sqrt(q)`` with the smallest valid ``A`` on the
    enumerated spectrum. For ``m = 0`` the estimator is the zero map and the
    error of the test mode is computed exactly.
    """
    w = instance.weights
    if w.kind != "exponential":
        raise ParameterError("exp_decay_check needs exponential weights")
    spectral = instance.spectral
    q_err = math.sqrt(w.q)
    A_err = decay_constants(spectral, q_err)
    q2 = q_err ** (1.0 / (48.0 * math.sqrt(2.0)))
    root1 = math.sqrt(spectral.lambdas[0])
    rows = []
    for n in n_grid:
        m = m_of_n_exp(n)
        internal = 4.0 * worst_case_error(spectral, m)
        curve = 4.0 * A_err * q2 ** (n / math.log(4.0 * n)) * root1
        f = CoefficientFunction.mode(m + 1, math.sqrt(spectral.lambdas[m]))
        if m == 0:
            rows.append(DecayRow(n, 0, math.sqrt(f.g_norm_sq()), 0.0, internal, curve, 0.0))
            continue
        est = randomized_error_battery(
            instance, [f], n, DELTA_EXP, R, seed, threads, max_retries, [f"mode_{m + 1}"], m=m
        )[0]
        rms = math.sqrt(est.mean_sq)
        se = est.std_err / (2.0 * rms) if rms > 0 else 0.0
        rows.append(DecayRow(n, m, rms, se, internal, curve, est.retries_mean))
    return DecayReport(w.q, A_err, q2, tuple(rows))
