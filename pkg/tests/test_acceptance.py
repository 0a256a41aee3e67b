"""End-to-end acceptance checks, one PASS/FAIL line each.

Tolerances and runtime limits are fixed here and must not be relaxed.
"""

import json
import math
import time

import numpy as np
import pytest

from ranwls.cli import run
from ranwls.complexity import c_omega, m_of_n, n_wor
from ranwls.error_lab import (
    battery_functions,
    concentration_grid,
    deviation_samples,
    exp_decay_check,
    randomized_error_battery,
)
from ranwls.rng import substream
from ranwls.sampler import SamplingDensity, draw_nodes
from ranwls.spectral import CoefficientFunction, ProblemInstance, SpectralData, WeightFamily
from ranwls.wls import ACCEPT_THRESHOLD, assemble, draw_accepted, inverse_norm_bound_check, solve

ALG = WeightFamily("algebraic", alpha=1.0)
SEED = 20240917


def test_reproduces_finite_expansions(acceptance_line):
    start = time.perf_counter()
    worst = 0.0
    for kind in ("fourier", "legendre", "cosine"):
        for d in (1, 2):
            inst = ProblemInstance.create(kind, ALG, d, 40)
            lam = inst.spectral.lambdas
            for m in (1, 4, 8):
                X, retries = draw_accepted(inst, m, 64 * m, substream(SEED, 100 * d + m))
                g = substream(SEED, 1000 * d + m, purpose=2)
                A = g.standard_normal((m, 20))
                if inst.basis.complex:
                    A = A + 1j * g.standard_normal((m, 20))
                # unit F-norm: sum |a_k|^2 / lambda_k = 1
                A = A / np.sqrt(np.sum(np.abs(A) ** 2 / lam[:m, None], axis=0))
                V = X.nodes
                samples = np.stack(
                    [CoefficientFunction(np.arange(1, m + 1), A[:, j])(inst.basis, V) for j in range(20)], axis=1
                )
                model = solve(inst, m, X, samples, retries)
                rel = np.linalg.norm(model.coeffs - A, axis=0) / np.linalg.norm(A, axis=0)
                worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10.0
    acceptance_line("reproduction of V_m", ok, f"max relative G-error {worst:.2e} (tol 1e-10), {elapsed:.1f} s (limit 10 s)")
    assert ok


def test_inverse_gram_norm_bound(acceptance_line):
    start = time.perf_counter()
    holds = total = 0
    worst = 0.0
    for d in (1, 2):
        inst = ProblemInstance.create("legendre", ALG, d, 40)
        for m in (4, 8):
            n = 64 * m
            for r in range(100):
                X, _ = draw_accepted(inst, m, n, substream(SEED, 10_000 * d + 100 * m + r))
                ok_r, value = inverse_norm_bound_check(assemble(inst, m, X))
                holds += ok_r
                total += 1
                worst = max(worst, value * n / 2.0)
    elapsed = time.perf_counter() - start
    ok = holds == total and elapsed < 60.0
    acceptance_line(
        "inverse Gram norm <= 2/n",
        ok,
        f"{holds}/{total} draws, worst ratio to 2/n {worst:.3f}, {elapsed:.1f} s (limit 60 s)",
    )
    assert ok


@pytest.mark.slow
def test_gram_concentration_tail(acceptance_line):
    start = time.perf_counter()
    inst = ProblemInstance.create("legendre", ALG, 1, 40)
    reps = concentration_grid(inst, [2, 4, 8], [256, 1024, 4096], [0.3, 0.5], 2000, SEED)
    elapsed = time.perf_counter() - start
    bad = [r for r in reps if not r.empirical_prob <= r.raw_bound]
    worst = max(reps, key=lambda r: r.empirical_prob / r.raw_bound)
    ok = not bad and elapsed < 300.0
    acceptance_line(
        "Gram deviation tail bound",
        ok,
        f"{len(reps) - len(bad)}/{len(reps)} cells within bound; tightest m={worst.m} n={worst.n} t={worst.t}: "
        f"{worst.empirical_prob:.4f} vs {worst.raw_bound:.3g}, {elapsed:.1f} s (limit 300 s)",
    )
    assert ok


@pytest.mark.slow
def test_randomized_error_bound(acceptance_line):
    start = time.perf_counter()
    inst = ProblemInstance.create("legendre", ALG, 2, 200)
    rows = []
    for n in (512, 2048):
        m = m_of_n(n, 0.5)
        battery = battery_functions(inst, m, SEED)
        rows += randomized_error_battery(
            inst, [f for _, f in battery], n, 0.5, 200, SEED, labels=[lab for lab, _ in battery]
        )
    elapsed = time.perf_counter() - start
    bad = [r for r in rows if not r.within_bound]
    worst = max(rows, key=lambda r: (r.mean_sq - r.bound_sq) / max(r.std_err, 1e-300))
    ok = not bad and elapsed < 300.0
    acceptance_line(
        "randomized error vs bound",
        ok,
        f"{len(rows) - len(bad)}/{len(rows)} estimates within bound+3se; closest {worst.label} at n={worst.n}: "
        f"{worst.mean_sq:.4g} vs {worst.bound_sq:.4g}, {elapsed:.1f} s (limit 300 s)",
    )
    assert ok


def test_acceptance_frequency(acceptance_line):
    inst = ProblemInstance.create("legendre", ALG, 1, 40)
    n = 2048
    parts = []
    ok = True
    for delta in (0.1, 0.5):
        m = m_of_n(n, delta)
        devs = deviation_samples(inst, m, n, 1000, SEED + int(100 * delta))
        freq = float(np.mean(devs <= ACCEPT_THRESHOLD))
        ok &= freq >= 1.0 - delta - 0.03
        parts.append(f"delta={delta}: m={m} freq={freq:.3f} (min {1 - delta - 0.03:.2f})")
    acceptance_line("acceptance frequency", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_exponential_decay(acceptance_line):
    start = time.perf_counter()
    inst = ProblemInstance.create("legendre", WeightFamily("exponential", q=0.5, A=1.0), 1, 80)
    rep = exp_decay_check(inst, [200, 400, 800, 1600], SEED, R=200)
    elapsed = time.perf_counter() - start
    emitted = all(math.isfinite(r.bound_internal) and math.isfinite(r.bound_decay) for r in rep.rows)
    ok = rep.all_within and emitted and elapsed < 120.0
    cells = ", ".join(f"n={r.n} m={r.m} {r.rms:.3g}<={r.bound_internal:.3g}|{r.bound_decay:.3g}" for r in rep.rows)
    acceptance_line(
        "exponential decay", ok, f"{cells}; decay curve above 4 e_wor: {rep.curves_ordered}; {elapsed:.1f} s (limit 120 s)"
    )
    assert ok


def test_complexity_search_matches_scan(acceptance_line):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for _ in range(500):
        M = int(rng.integers(1, 300))
        lam = np.sort(10.0 ** rng.uniform(-12, 2, M))[::-1]
        spectrum = SpectralData.from_sequence(lam)
        for eps in 10.0 ** rng.uniform(-7, 2, 20):
            hits = np.flatnonzero(np.sqrt(lam) <= eps)
            expected = int(hits[0]) if hits.size else math.inf
            mismatches += n_wor(spectrum, eps) != expected
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10.0
    acceptance_line("complexity search", ok, f"{mismatches} mismatches in 10000 cases, {elapsed:.1f} s (limit 10 s)")
    assert ok


def test_power_constant_closed_form(acceptance_line):
    scale, offset = 96.0 * math.sqrt(2.0), math.log(192.0 * math.sqrt(2.0))
    worst = 0.0
    for omega in (0.1, 0.5, 1.0, 2.0):
        log_x = np.linspace(0.0, 60.0 / omega, 10**6)
        grid = float(np.max(scale * (offset + log_x) * np.exp(-omega * log_x)))
        worst = max(worst, abs(c_omega(omega) - grid) / grid)
    ok = worst <= 1e-6
    acceptance_line("power-form constant", ok, f"max relative gap to 1e6-point grid {worst:.2e} (tol 1e-6)")
    assert ok


def test_stochastic_commands_are_deterministic(tmp_path, acceptance_line):
    alg = tmp_path / "alg.json"
    alg.write_text(json.dumps({"basis": {"kind": "legendre"}, "weights": {"kind": "algebraic", "alpha": 1.0},
                               "d": 2, "M": 60}))
    exp = tmp_path / "exp.json"
    exp.write_text(json.dumps({"basis": {"kind": "cosine"}, "weights": {"kind": "exponential", "q": 0.5},
                               "d": 1, "M": 60}))
    commands = {
        "sample": ["sample", "--config", str(alg), "-n", "128", "-m", "4", "--accepted"],
        "approximate": ["approximate", "--config", str(alg), "-n", "512"],
        "error-curve": ["error-curve", "--config", str(alg), "--n-grid", "512", "--replications", "10"],
        "concentration": ["concentration", "--config", str(alg), "--m-grid", "2", "--n-grid", "128",
                          "--replications", "50"],
        "exp-decay": ["exp-decay", "--config", str(exp), "--n-grid", "800,1600", "--replications", "10"],
    }
    same = []
    for name, argv in commands.items():
        trees = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}"
            assert run(argv + ["--seed", "7", "--out", str(out)]) == 0
            trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same.append(trees[0] == trees[1])
    ok = all(same)
    acceptance_line("deterministic artifacts", ok, f"{sum(same)}/{len(same)} commands byte-identical on rerun")
    assert ok


def test_mixture_gram_expectation(acceptance_line):
    inst = ProblemInstance.create("legendre", ALG, 1, 20)
    m, n, R = 4, 32, 2000
    dens = SamplingDensity(inst, m)
    Hs = np.array([assemble(inst, m, draw_nodes(dens, n, substream(SEED, r))).H for r in range(R)])
    mean = Hs.mean(axis=0)
    se = Hs.std(axis=0, ddof=1) / math.sqrt(R)
    z = np.abs(mean - np.eye(m)) / np.where(se > 0, se, np.inf)
    ok = bool(np.all(z <= 4.0))
    acceptance_line("mixture Gram expectation", ok, f"max entrywise |mean - I| / se = {z.max():.2f} (limit 4)")
    assert ok
