"""Finite-grid diagnostics for the algebraic and exponential tractability notions.

Tractability is an asymptotic statement and a finite table can never prove
or refute it. The verdicts here are heuristics with ``inconclusive`` as the
default:

* bounded-form notions (SPT, PT, QPT) fit the tightest upper envelope of
  ``ln n`` with nonnegative exponents on the leading part of the grid (the
  smaller values of ``a`` and ``d``) and extrapolate it to the remaining
  cells; an overshoot of at most ``slack`` gives ``consistent`` and one
  above ``slack**2`` gives ``inconsistent``;
* limit notions (UWT, WT, (s,t)-WT) need ``ln n = o(a^s + d^t)``; along every
  grid line the elasticity of ``ln n`` with respect to the growing term
  (``a^s`` or ``d^t``) is read off the last segment, and an elasticity near
  one or above makes the notion ``inconsistent`` while ``consistent`` needs
  every line to be clearly sublinear.

``a`` is ``1/eps`` for ALG notions and ``1 + ln(1/eps)`` for EXP notions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .complexity import (
    ComplexityTable,
    bound_log,
    bound_log_delta,
    bound_power,
    bound_power_delta,
    complexity_table,
)
from .errors import ParameterError, TruncationError
from .spectral import SpectralData, WeightFamily, enumerate_eigenvalues

NOTIONS = ("SPT", "PT", "QPT", "UWT", "WT", "(s,t)-WT")
UWT_EXPONENTS = (0.5, 1.0, 2.0)
VERDICTS = ("consistent", "inconsistent", "inconclusive")
# a consistent verdict for the value carries over to the key
IMPLIED_BY = {"PT": "SPT", "QPT": "PT", "UWT": "QPT", "WT": "UWT", "(s,t)-WT": "QPT"}


@dataclass(frozen=True)
class ProductFamily:
    """Tensor-product eigenvalues from a weight family, truncated at ``M``."""

    weights: WeightFamily
    M: int

    def spectrum(self, d: int) -> SpectralData:
        return enumerate_eigenvalues(self.weights, d, self.M)


@dataclass(frozen=True)
class SequenceFamily:
    """Closed-form spectra given directly by the flat index.

    ``power``: ``scale * k**(-exponent)``; ``geometric``: ``scale * q**(k-1)``;
    ``flat_block``: ``scale`` for ``k <= 2**d``, then ``scale * (k - 2**d + 1)**-2``.
    The first two do not depend on ``d``.
    """

    kind: str
    M: int
    exponent: float = 2.0
    q: float = 0.5
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "geometric", "flat_block"):
            raise ParameterError(f"unknown sequence family {self.kind!r}")
        if self.M < 1 or not self.scale > 0:
            raise ParameterError("M must be positive and scale > 0")
        if self.kind == "power" and not self.exponent > 0:
            raise ParameterError("power exponent must be positive")
        if self.kind == "geometric" and not 0 < self.q < 1:
            raise ParameterError("q must lie in (0, 1)")

    def spectrum(self, d: int) -> SpectralData:
        if self.kind == "flat_block":
            block = 2**d
            k = np.arange(1, block + self.M + 1, dtype=float)
            lam = np.where(k <= block, 1.0, np.maximum(k - block + 1, 1.0) ** -2.0)
        else:
            k = np.arange(1, self.M + 1, dtype=float)
            lam = k ** (-self.exponent) if self.kind == "power" else self.q ** (k - 1)
        return SpectralData.from_sequence(self.scale * lam)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "M": self.M, "exponent": self.exponent, "q": self.q, "scale": self.scale}


def probe_grid(family, d_grid, eps_grid, criterion="ABS", delta=0.01, omega=0.5) -> ComplexityTable:
    """Worst-case complexity table of a spectral family over ``d`` and ``eps``."""
    d_grid = sorted(set(int(d) for d in d_grid))
    if not d_grid or not len(eps_grid):
        raise ParameterError("grids must be nonempty")
    spectra = {d: family.spectrum(d) for d in d_grid}
    return complexity_table(spectra, eps_grid, criterion, delta, omega)


@dataclass(frozen=True)
class TractabilityReport:
    notion: str
    exponents: dict
    residual: float
    verdict: str
    grid: dict
    details: dict = field(default_factory=dict)
    heuristic: bool = True

    def summary(self) -> str:
        ex = ", ".join(f"{k}={v:.4g}" for k, v in self.exponents.items() if isinstance(v, (int, float)))
        return f"{self.notion}: {self.verdict} ({ex}; residual={self.residual:.4g}) [heuristic]"

    def to_dict(self) -> dict:
        return {
            "notion": self.notion,
            "exponents": self.exponents,
            "residual": self.residual,
            "verdict": self.verdict,
            "grid": self.grid,
            "details": self.details,
            "heuristic": self.heuristic,
        }


def parse_notion(notion: str) -> tuple:
    """Splits ``'ALG-PT'`` into ``('ALG', 'PT')``."""
    m = re.fullmatch(r"\s*(ALG|EXP)\s*-\s*(.+?)\s*", notion.upper())
    if not m:
        raise ParameterError(f"notion must look like ALG-PT or EXP-(s,t)-WT, got {notion!r}")
    kind, base = m.group(1), m.group(2).replace(" ", "").replace("(S,T)", "(s,t)")
    if base not in NOTIONS:
        raise ParameterError(f"unknown notion {base!r}; expected one of {NOTIONS}")
    return kind, base


def _growth_variable(kind: str, eps: np.ndarray) -> np.ndarray:
    return 1.0 / eps if kind == "ALG" else 1.0 + np.log(1.0 / eps)


def _cells(table: ComplexityTable):
    if not table.finite:
        raise TruncationError("table contains truncated cells; enlarge M")
    d = np.repeat(np.asarray(table.d_grid, dtype=float), len(table.eps_grid))
    eps = np.tile(np.asarray(table.eps_grid, dtype=float), len(table.d_grid))
    return d, eps, table.n_wor.ravel().astype(float)


TRAIN_FRACTION = 2.0 / 3.0
ELASTICITY_DECAY = 0.75
ELASTICITY_GROW = 0.9


def _envelope(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Coefficients of the tightest ``A x >= y`` in total gap, exponents nonnegative."""
    k = A.shape[1]
    bounds = [(None, None)] + [(0, None)] * (k - 1)
    res = linprog(A.sum(axis=0), A_ub=-A, b_ub=-y, bounds=bounds, method="highs")
    if res.status != 0:
        raise ParameterError(f"envelope fit failed: {res.message}")
    return res.x


def _leading(values: np.ndarray, grid) -> np.ndarray:
    ordered = np.sort(np.asarray(grid, dtype=float))
    keep = max(2, int(math.ceil(TRAIN_FRACTION * ordered.size)))
    return values <= ordered[min(keep, ordered.size) - 1]


def _fit_bounded(kind, base, d, eps, n, slack, d_grid, eps_grid):
    names = {"SPT": ["p"], "PT": ["p", "q"], "QPT": ["t"]}[base]
    a = _growth_variable(kind, eps)
    train = _leading(d, d_grid) & _leading(a, _growth_variable(kind, np.asarray(eps_grid, dtype=float)))
    keep = n >= 1
    la = np.log(a)
    cols = {"SPT": [la], "PT": [la, np.log(d)], "QPT": [(1.0 + np.log(d)) * (1.0 + la)]}[base]
    A = np.column_stack([np.ones_like(la)] + cols)
    y = np.log(np.maximum(n, 1.0))
    test = keep & ~train
    train = keep & train
    if np.unique(eps[train]).size < 2 or not test.any():
        return None
    x = _envelope(A[train], y[train])
    excess = float(np.max(y[test] - A[test] @ x))
    if excess <= math.log(slack):
        verdict = "consistent"
    elif excess > 2.0 * math.log(slack):
        verdict = "inconsistent"
    else:
        verdict = "inconclusive"
    full = _envelope(A[keep], y[keep])
    exps = {name: float(v) + 0.0 for name, v in zip(names, full[1:])}  # drop signed zeros
    exps["C"] = float(math.exp(full[0]))
    return exps, excess, verdict, int(train.sum()), int(test.sum())


def _line_trend(var: np.ndarray, logn: np.ndarray) -> str:
    """Elasticity of ``ln n`` in ``var`` over the last segment of a line."""
    order = np.argsort(var)
    var, logn = var[order], logn[order]
    if logn[-1] == 0.0:
        return "decays"
    if logn[-2] == 0.0 or var[-1] == var[-2]:
        return "flat"
    e = math.log(logn[-1] / logn[-2]) / math.log(var[-1] / var[-2])
    if e < ELASTICITY_DECAY:
        return "decays"
    if e > ELASTICITY_GROW:
        return "grows"
    return "flat"


def _limit_verdict(kind, d, eps, n, alpha, beta, d_grid, eps_grid):
    a = _growth_variable(kind, eps)
    denom = a**alpha + d**beta
    logn = np.log(np.maximum(n, 1.0))
    ratio = logn / denom
    trends = []
    if len(eps_grid) >= 2:
        for dv in d_grid:
            sel = d == dv
            trends.append(_line_trend(a[sel] ** alpha, logn[sel]))
    if len(d_grid) >= 2:
        for ev in eps_grid:
            sel = eps == ev
            trends.append(_line_trend(d[sel] ** beta, logn[sel]))
    if "grows" in trends:
        verdict = "inconsistent"
    elif all(t == "decays" for t in trends):
        verdict = "consistent"
    else:
        verdict = "inconclusive"
    tail = float(ratio[np.argmax(denom)])
    return verdict, float(ratio.max()), tail


def classify(table: ComplexityTable, notion: str, params: Optional[dict] = None, slack: float = 2.0) -> TractabilityReport:
    """Heuristic verdict for one tractability notion on a complexity table.

    Args:
        table: Output of :func:`probe_grid`; must have no truncated cells.
        notion: ``'ALG-SPT'``, ``'EXP-QPT'``, ``'ALG-(s,t)-WT'`` and so on.
        params: ``{'s': .., 't': ..}`` for (s,t)-WT; ``{'pairs': [(a, b), ...]}``
            overrides the UWT exponent pairs.
        slack: Multiplicative tolerance on the fitted bound.

    A notion that follows from a stronger one judged consistent on the same
    table is reported consistent, with the stronger notion in ``details``.
    """
    kind, base = parse_notion(notion)
    params = params or {}
    report = _classify_own(table, kind, base, params, slack)
    if report.verdict == "consistent" or base not in IMPLIED_BY or "reason" in report.details:
        return report
    stronger = classify(table, f"{kind}-{IMPLIED_BY[base]}", params, slack)
    if stronger.verdict != "consistent":
        return report
    return replace(report, verdict="consistent", details={**report.details, "implied_by": stronger.notion})


def _classify_own(table, kind, base, params, slack):
    name = f"{kind}-{base}"
    d, eps, n = _cells(table)
    grid = {"eps": list(table.eps_grid), "d": list(table.d_grid), "criterion": table.criterion}
    if len(table.eps_grid) < 2 or len(table.d_grid) < 2:
        return TractabilityReport(name, {}, float("nan"), "inconclusive", grid, {"reason": "degenerate grid"})

    if base in ("SPT", "PT", "QPT"):
        fit = _fit_bounded(kind, base, d, eps, n, slack, table.d_grid, table.eps_grid)
        if fit is None:
            return TractabilityReport(name, {}, float("nan"), "inconclusive", grid, {"reason": "too few nonzero cells"})
        exps, excess, verdict, n_train, n_test = fit
        details = {"slack": slack, "train_cells": n_train, "test_cells": n_test}
        return TractabilityReport(name, exps, excess, verdict, grid, details)

    if base == "WT":
        pairs = [(1.0, 1.0)]
    elif base == "(s,t)-WT":
        if "s" not in params or "t" not in params:
            raise ParameterError("(s,t)-WT needs params s and t")
        pairs = [(float(params["s"]), float(params["t"]))]
    else:
        pairs = [tuple(p) for p in params.get("pairs", [(a, b) for a in UWT_EXPONENTS for b in UWT_EXPONENTS])]
    per_pair = {}
    worst_tail = 0.0
    for alpha, beta in pairs:
        if not (alpha > 0 and beta > 0):
            raise ParameterError("exponents must be positive")
        v, peak, tail = _limit_verdict(kind, d, eps, n, alpha, beta, table.d_grid, table.eps_grid)
        per_pair[f"{alpha:g},{beta:g}"] = {"verdict": v, "max_ratio": peak, "tail_ratio": tail}
        worst_tail = max(worst_tail, tail)
    verdicts = [p["verdict"] for p in per_pair.values()]
    if "inconsistent" in verdicts:
        verdict = "inconsistent"
    elif all(v == "consistent" for v in verdicts):
        verdict = "consistent"
    else:
        verdict = "inconclusive"
    exps = {"s": pairs[0][0], "t": pairs[0][1]} if len(pairs) == 1 else {}
    return TractabilityReport(name, exps, worst_tail, verdict, grid, {"pairs": per_pair})


def transfer_report(table: ComplexityTable, delta: Optional[float] = None, omega: Optional[float] = None) -> list:
    """Side-by-side worst-case complexities and standard-information bounds.

    ``delta`` must match the table (the scaled complexities depend on it);
    ``omega`` may differ since it only enters the constants.
    """
    if delta is not None and not math.isclose(delta, table.delta):
        raise ParameterError(f"table was built with delta={table.delta}, got {delta}")
    omega = table.omega if omega is None else omega
    rows = []
    for i, d in enumerate(table.d_grid):
        for j, eps in enumerate(table.eps_grid):
            x = float(table.n_wor[i, j])
            xq = float(table.n_wor_quarter[i, j])
            xs = float(table.n_wor_scaled[i, j])
            row = {
                "eps": eps,
                "d": d,
                "n_wor": x,
                "bound_log": bound_log(xq),
                "bound_power": bound_power(xq, omega),
                "bound_log_delta": bound_log_delta(xs, table.delta),
                "bound_power_delta": bound_power_delta(xs, omega, table.delta),
            }
            for key in ("bound_log", "bound_power", "bound_log_delta", "bound_power_delta"):
                b = row[key]
                ok = x > 1 and math.isfinite(x) and math.isfinite(b)
                row["ratio_" + key[6:]] = math.log(b) / math.log(x) if ok else float("nan")
            rows.append(row)
    return rows
