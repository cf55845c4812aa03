"""Time the compiled kernels against the numpy fallback, plus one allocator decision.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from cotune import allocator as alloc
from cotune import kernels
from cotune.core import ComponentId, RewardHistory
from cotune.kernels import python_backend
from cotune.target_sim import SyntheticSystem


def cases(rng):
    system = SyntheticSystem(seed=0)
    p = system.params
    n = 2000
    k = rng.random((n, p.knob_dims))
    b = (rng.random((n, p.index_bits)) < 0.5).astype(float)
    q = rng.integers(0, p.rewrites, (n, p.queries))
    obj_args = (k, b, q, system.mu_bit, system.gains, p.lam, system.speedups, system.base_costs)
    X1, X2 = rng.random((200, 18)), rng.random((2000, 18))
    ls = rng.uniform(0.2, 2.0, 18)
    rewards = rng.exponential(1.0, 500) * (rng.random(500) < 0.6)
    return {
        "sq_exp_kernel 200x2000x18": ("sq_exp_kernel", (X1, X2, ls, 1.3)),
        "synthetic_objective n=2000": ("synthetic_objective", obj_args),
        "beta_counts 500 rewards": ("beta_counts", (rewards, 7, 0.25)),
    }


def best_of(fn, args, repeat, number):
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", python_backend)]
    if kernels.compiled_backend is not None:
        backends.append(("compiled", kernels.compiled_backend))
    else:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'kernel':<30}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for label, (fname, fargs) in cases(rng).items():
        times = [best_of(getattr(mod, fname), fargs, args.repeat, 20) for _, mod in backends]
        speed = f"{times[0] / times[1]:9.1f}x" if len(times) == 2 else ""
        print(f"{label:<30}" + "".join(f"{t * 1e3:12.3f}ms" for t in times) + speed)

    hs = [RewardHistory(ComponentId(i, f"a{i}"), list(rng.exponential(1.0, 40))) for i in range(3)]
    state = alloc.make_allocator("ts_buffer", seed=0)
    t = best_of(lambda: alloc.select_agent(hs, state), (), args.repeat, 200)
    print(f"ts_buffer selection, 3 agents: {t * 1e3:.4f} ms per decision ({kernels.BACKEND_NAME} backend)")


if __name__ == "__main__":
    main()
