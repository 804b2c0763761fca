"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_backends.py [--repeat 3] [--quick]

Times the network simplex on square uniform instances and MCMC sweeps at
several k, and checks that both backends agree on the results.
"""

import argparse
import time

import numpy as np

from betasphere import _backend
from betasphere.geometry import chordal_matrix, fibonacci_lattice, random_unit_vectors
from betasphere.samplers import SectionMatrix, log_norm_constants, spherical_ensemble_sample


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def simplex_case(n, M, rng):
    P = random_unit_vectors(n, rng)
    C = chordal_matrix(P, fibonacci_lattice(M).nodes)
    return np.full(n, 1.0 / n), np.full(M, 1.0 / M), C


def sweep_case(k, n_sweeps, rng):
    # chains start from an ensemble draw; i.i.d. points are too ill-conditioned at large k
    P = spherical_ensemble_sample(k, rng).unit_vectors.copy()
    Minv = np.ascontiguousarray(SectionMatrix(P).inverse(), dtype=complex)
    order = rng.permuted(np.tile(np.arange(k, dtype=np.intp), (n_sweeps, 1)), axis=1)
    rnd = np.empty((n_sweeps, k, 5))
    rnd[..., 0] = rng.random((n_sweeps, k))
    rnd[..., 1:4] = rng.standard_normal((n_sweeps, k, 3))
    rnd[..., 4] = 1.0 - rng.random((n_sweeps, k))
    return P, Minv, log_norm_constants(k), order, rnd


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small sizes only")
    args = ap.parse_args(argv)

    try:
        cy = _backend.get("cython")
    except ImportError:
        raise SystemExit("compiled core not built; run `pip install --no-build-isolation -e .`")
    py = _backend.get("python")
    rng = np.random.default_rng(0)

    print(f"{'kernel':<10}{'size':>14}{'python s':>12}{'cython s':>12}{'speedup':>10}  agree")
    simplex_sizes = [(8, 256), (16, 1024)] if args.quick else [(8, 256), (16, 1024), (64, 4096)]
    for n, M in simplex_sizes:
        a, b, C = simplex_case(n, M, rng)
        tp, rp = best_of(lambda: py.network_simplex(a, b, C), args.repeat)
        tc, rc = best_of(lambda: cy.network_simplex(a, b, C), args.repeat)
        agree = abs(np.sum(rp[0] * C) - np.sum(rc[0] * C)) <= 1e-12
        print(f"{'simplex':<10}{f'{n}x{M}':>14}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}  {agree}")

    sweep_sizes = [(16, 200), (64, 50)] if args.quick else [(16, 200), (64, 50), (256, 10)]
    for k, n_sweeps in sweep_sizes:
        P, Minv, logc, order, rnd = sweep_case(k, n_sweeps, rng)

        def run(core):
            Pc, Mc = P.copy(), Minv.copy()
            acc, trace, _ = core.mcmc_sweeps(Pc, Mc, logc, 2.0, 2.0 / np.sqrt(k), order, rnd)
            return acc, np.asarray(trace)

        tp, rp = best_of(lambda: run(py), args.repeat)
        tc, rc = best_of(lambda: run(cy), args.repeat)
        agree = rp[0] == rc[0] and np.allclose(rp[1], rc[1], atol=1e-8)
        print(f"{'mcmc':<10}{f'k={k} x{n_sweeps}':>14}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
