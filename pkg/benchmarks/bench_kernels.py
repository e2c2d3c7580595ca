"""Time the JIT compute kernels against their pure-numpy twins.

Each kernel is fed inputs sized like the desk-scale problem (60 players,
350 tiles, 4 components, about 30k shots) and timed best-of-N.  The numba
flavor is warmed once before timing so compilation is not measured.  The
report also prints the largest absolute disagreement between the two
flavors, which should sit within a few ulps of zero.

Run from the repository root:

    python3 benchmarks/bench_kernels.py --repeats 50
"""

import argparse
import time

import numpy as np

from shotfactor import backend


def _time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def _max_diff(a, b):
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    return float(np.max(np.abs(a - b)))


def build_cases(seed):
    """Representative inputs for every kernel pair."""
    rng = np.random.default_rng(seed)
    n_players, n_tiles, k, n_shots = 60, 350, 4, 30000

    counts = rng.poisson(1.5, size=n_tiles).astype(np.float64)
    field = rng.normal(0.0, 1.0, size=n_tiles)

    makes = rng.integers(0, 40, size=(n_players, k)).astype(np.float64)
    attempts = makes + rng.integers(0, 40, size=(n_players, k))
    logits = rng.normal(0.0, 1.0, size=(n_players, k))

    weights = rng.uniform(0.1, 2.0, size=(n_players, k))
    bases = rng.uniform(0.0, 1.0, size=(k, n_tiles))
    bases /= bases.sum(axis=1, keepdims=True)
    players = rng.integers(0, n_players, size=n_shots)
    tiles = rng.integers(0, n_tiles, size=n_shots)
    uniforms = rng.random(n_shots)
    types = rng.integers(0, k, size=n_shots)
    made = (rng.random(n_shots) < 0.45).astype(np.float64)

    cx = rng.uniform(0.0, 35.0, size=n_tiles)
    cy = rng.uniform(0.0, 50.0, size=n_tiles)

    return [
        ("poisson_field_loglik", (counts, field, -0.2, 5.0)),
        ("bernoulli_logits_loglik", (makes, attempts, logits)),
        ("draw_type_indices", (weights, bases, players, tiles, uniforms)),
        ("sq_exp_matrix", (cx, cy, 1.3, 8.0)),
        ("aggregate_outcomes", (players, types, made, n_players, k)),
        ("mixture_probability_surface", (weights[0], bases, logits[0])),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Benchmark the JIT kernels against the pure-numpy path."
    )
    parser.add_argument(
        "--repeats", type=int, default=50, help="timing repetitions per kernel"
    )
    parser.add_argument("--seed", type=int, default=0, help="input generation seed")
    args = parser.parse_args(argv)

    if not backend.HAS_NUMBA:
        print(
            "numba backend unavailable (SHOTFACTOR_BACKEND=numpy or numba "
            "missing); nothing to compare."
        )
        return 0

    print(f"repeats per kernel: {args.repeats}")
    header = f"{'kernel':<30} {'numpy':>10} {'numba':>10} {'speedup':>8} {'max diff':>10}"
    print(header)
    print("-" * len(header))
    for name, inputs in build_cases(args.seed):
        numpy_fn = getattr(backend, f"{name}_numpy")
        numba_fn = getattr(backend, f"{name}_numba")
        out_numba = numba_fn(*inputs)  # warm-up triggers compilation
        out_numpy = numpy_fn(*inputs)
        if isinstance(out_numpy, tuple):
            diff = max(_max_diff(a, b) for a, b in zip(out_numpy, out_numba))
        else:
            diff = _max_diff(out_numpy, out_numba)
        t_numpy = _time(numpy_fn, inputs, args.repeats)
        t_numba = _time(numba_fn, inputs, args.repeats)
        print(
            f"{name:<30} {t_numpy * 1e3:>8.3f}ms {t_numba * 1e3:>8.3f}ms "
            f"{t_numpy / t_numba:>7.1f}x {diff:>10.2e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
