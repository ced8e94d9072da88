"""Compare the rescaled label walk with the stable limit objects.

Prints Laplace transform checks for both simulation routes and the
scaling identity of the pair (X, D). Run with ``python3 demos/stable_limits.py``.
"""
import numpy as np
from scipy.stats import ks_2samp

from stablemaps.stablesim import (
    distance_process,
    exact_walk_laplace,
    holder_estimate,
    laplace_check,
    scaling_identity_test,
    shot_noise_endpoints,
    simulate_stable_walk,
    walk_endpoints,
)
from stablemaps.weights import calibrate


def main() -> None:
    model = calibrate(2.0)
    rng = np.random.default_rng(5)

    walk = walk_endpoints(model, 10**6, 10**4, rng)
    shot = shot_noise_endpoints(model.alpha, 1e-3, 10**4, rng)
    print(f"KS walk vs shot noise at t = 1: p = {ks_2samp(walk, shot).pvalue:.3f}")
    for name, x in (("walk", walk), ("shot noise", shot)):
        for row in laplace_check(x, (0.5, 1.0, 2.0), model.alpha):
            print(f"  {name:10s} u = {row['u']}: {row['estimate']:.4f} vs {row['target']:.4f} (z = {row['z']:+.2f})")
    for n in (10**4, 10**5, 10**6):
        bias = exact_walk_laplace(model, n, 2.0) / np.exp(2.0**model.alpha) - 1
        print(f"  exact walk transform at u = 2, n = {n}: relative bias {bias:+.4f}")

    res = scaling_identity_test(model.alpha, 4.0, 2000, rng, eps=1e-3)
    print(f"scaling identity r = 4: KS p for X {res['ks_X']:.3f}, for D {res['ks_D']:.3f}")

    path = simulate_stable_walk(model, 2**16, 1.0, rng, eps=0.005)
    ds = distance_process(path, 11, positions=np.arange(0, len(path.t), 16))
    fit = holder_estimate(ds.t, ds.D)
    print(f"distance process: {ds.audit['registered_jumps']} jumps, Hoelder slope {fit.slope:.3f} "
          f"(single path; pool several paths for a stable estimate)")


if __name__ == "__main__":
    main()
