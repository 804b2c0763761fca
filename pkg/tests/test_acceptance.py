"""End-to-end acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line before asserting, so the
full list is visible in ``pytest -v`` output even when a criterion fails.
"""

import math

import numpy as np
import pytest

from betasphere.bergman import transport_plan_cost
from betasphere.experiments import (
    Experiment,
    ExperimentConfig,
    distance_to_set_bound,
    run,
    run_concentration,
    run_kernel_decay,
    run_lower_bound,
    run_rate,
    run_validate,
    sampler_law_ks,
)
from betasphere.geometry import DiscreteMeasure, fibonacci_lattice
from betasphere.ot import entropic_ot, exact_ot, uniform_lattice_measure
from betasphere.samplers import spherical_ensemble_sample


@pytest.fixture
def report(request):
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n} ({name}): {detail}"
        print(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return emit


@pytest.mark.slow
def test_rate(report):
    rep = run_rate(ExperimentConfig(Experiment.RATE))
    ok = rep.checks["slope_in_band"] and rep.checks["scaled_ratio_le_2"] and not rep.failures
    detail = (f"slope {rep.slope:.4f} in [-0.60, -0.40], 95% CI [{rep.slope_ci[0]:.4f}, "
              f"{rep.slope_ci[1]:.4f}]; sqrt(k) mean W ratio {rep.summary['scaled_ratio']:.3f} <= 2")
    assert report(1, "rate", ok, detail)


@pytest.mark.slow
def test_lower_bound(report):
    rep = run_lower_bound(ExperimentConfig(Experiment.LOWER_BOUND))
    ok = rep.checks["bound_le_W_everywhere"] and rep.checks["sqrt_k_bound_within_factor_4"]
    ens = ", ".join(f"{c['sqrt_k_bound']:.3f}" for c in rep.summary["ensemble"].values())
    fib = ", ".join(f"{c['sqrt_k_bound']:.3f}" for c in rep.summary["fibonacci"].values())
    detail = (f"bound <= W on all {len(rep.rows)} rows: {rep.checks['bound_le_W_everywhere']}; "
              f"sqrt(k) bound ensemble [{ens}], fibonacci [{fib}], band "
              f"{rep.summary['sqrt_k_bound_band']:.3f} <= 4")
    assert report(2, "lower bound", ok, detail)


@pytest.mark.slow
def test_sampler_law_ks(report):
    rep = sampler_law_ks(k=8, beta=2.0, draws=500, seed=42, alpha=0.01)
    ok = not rep.rejected
    detail = (f"KS statistic {rep.statistic:.4f}, p = {rep.pvalue:.4f} >= 0.01 "
              f"({rep.draws} vs {rep.draws} draws, {rep.sweeps} sweeps, acceptance "
              f"{rep.acceptance_rate:.3f})")
    assert report(3, "sampler law", ok, detail)


def test_identity_suite(report):
    rep = run_validate(ExperimentConfig(Experiment.VALIDATE))
    # family: (largest k the suite must reach, tolerance)
    required = {
        "gram_orthonormality": (16, 1e-8),
        "lagrange_delta": (64, 1e-8),
        "ratio_identity": (None, 1e-7),
        "kernel_closed_form": (128, 1e-8),
        "plan_marginals": (None, 1e-6),
        "bergman_density": (None, 1e-12),
    }
    parts, ok = [], rep.passed
    for fam, (kmax, tol) in required.items():
        rows = [r for r in rep.rows if r["family"] == fam]
        worst = max(r["residual"] for r in rows)
        covered = kmax is None or max(r["k"] for r in rows) == kmax
        ok = ok and worst <= tol and covered
        parts.append(f"{fam} {worst:.1e} <= {tol:.0e}")
    assert report(4, "identity suite", ok, "; ".join(parts))


def test_ot_cross_validation(report):
    rng = np.random.default_rng(20240611)
    worst_dev = worst_gap = worst_sandwich = 0.0
    sizes = []
    for i in range(50):
        k = [1, 2, 4, 8, 16][i % 5]
        M = [64, 128, 256][(i // 5) % 3]
        if i == 49:
            k, M = 16, 256
        cfg = spherical_ensemble_sample(k, rng)
        mu = DiscreteMeasure.empirical(cfg.unit_vectors)
        nu = uniform_lattice_measure(M)
        ex = exact_ot(mu, nu)
        en = entropic_ot(mu, nu)
        lb = distance_to_set_bound(cfg.unit_vectors, nu)
        # the plan is integrated on the lattice that discretises sigma in W
        plan = transport_plan_cost(cfg, fibonacci_lattice(M))
        worst_dev = max(worst_dev, abs(en.value - ex.value))
        worst_gap = max(worst_gap, ex.duality_gap)
        worst_sandwich = max(worst_sandwich, en.dual_value - ex.value, lb - ex.value,
                             ex.value - plan, ex.value - en.value)
        sizes.append((k, M))
    # 1e-12 covers float summation order only
    ok = worst_dev <= 5e-3 and worst_gap <= 1e-8 and worst_sandwich <= 1e-12
    detail = (f"50 instances up to {max(sizes)[0]}x{max(s[1] for s in sizes)}: "
              f"|entropic - exact| <= {worst_dev:.2e} (tol 5e-3), gap <= {worst_gap:.1e} (tol 1e-8), "
              f"worst sandwich violation {worst_sandwich:.1e}")
    assert report(5, "OT cross-validation", ok, detail)


def test_kernel_decay(report):
    rep = run_kernel_decay(ExperimentConfig(Experiment.KERNEL_DECAY), samples=10_000)
    ks = [r["k"] for r in rep.rows]
    ok = rep.passed and ks == [4, 8, 16, 32, 64, 128, 256] and all(r["pairs"] == 10_000 for r in rep.rows)
    detail = (f"sqrt(k) offdiag ratio {rep.summary['scaled_ratio']:.3f} <= 3 over k {ks[0]}..{ks[-1]}; "
              f"violations {sum(r['violations'] for r in rep.rows)} over 10^4 pairs per k")
    assert report(6, "kernel decay", ok, detail)


@pytest.mark.slow
def test_concentration(report):
    rep = run_concentration(ExperimentConfig(Experiment.CONCENTRATION, trials=200))
    cells = rep.summary["cells"]
    c64, c256 = cells["64"], cells["256"]
    ok = (rep.checks["std_decreasing"] and rep.checks["probe_exceedance_le_0.10"]
          and c64["tail_exceedance"] == 0.0 and c256["tail_exceedance"] == 0.0
          and c64["tail_threshold_vacuous"] and c256["tail_threshold_vacuous"])
    detail = (f"std {c64['std']:.2e} -> {c256['std']:.2e}; 3*mean exceedance "
              f"{c64['probe_exceedance']:.3f}, {c256['probe_exceedance']:.3f} <= 0.10; "
              f"11 sqrt(log k)/sqrt(k) = {c64['tail_threshold']:.2f}, {c256['tail_threshold']:.2f} "
              f"exceedance 0 (vacuous: threshold >= 1 = diameter)")
    assert report(7, "concentration", ok, detail)


def test_determinism(report):
    small = {
        Experiment.RATE: dict(k_values=(4, 8), trials=2, lattice_M=256),
        Experiment.LOWER_BOUND: dict(k_values=(4,), trials=2, lattice_M=256),
        Experiment.CONCENTRATION: dict(k_values=(4,), trials=200, lattice_M=64),
        Experiment.KERNEL_DECAY: dict(k_values=(4, 8)),
        Experiment.PLAN_COST: dict(k_values=(4,), trials=2, lattice_M=256),
        Experiment.VALIDATE: dict(),
    }
    same = {}
    for exp, kw in small.items():
        a = run(ExperimentConfig(exp, seed=7, **kw)).csv_text()
        b = run(ExperimentConfig(exp, seed=7, **kw)).csv_text()
        same[exp.value] = a.encode() == b.encode()
    mc = [run(ExperimentConfig(Experiment.RATE, k_values=(4,), trials=2, beta=1.5, mcmc_sweeps=40,
                               lattice_M=128, seed=7)).csv_text() for _ in range(2)]
    same["rate beta=1.5 mcmc"] = mc[0] == mc[1]
    ok = all(same.values())
    assert report(8, "determinism", ok, "byte-identical CSV bodies for " + ", ".join(
        f"{k}={'yes' if v else 'NO'}" for k, v in same.items()))
