"""Sample one large map and look at it from the label side and the graph side.

Run with ``python3 demos/map_walkthrough.py [n_white]``.
"""
import sys

import numpy as np

from stablemaps.bdg import mobile_to_map
from stablemaps.mobile import coding_paths, condition_size
from stablemaps.pmap import profile
from stablemaps.weights import calibrate


def main(n: int = 20_000) -> None:
    model = calibrate(2.0)
    print(f"alpha = {model.alpha:.2f}, beta = {model.beta:.6f}, Z_q = {model.Zq:.6f}, c0 = {model.c0:.6f}")

    mobile = condition_size(model, np.random.default_rng(1), n, mode="window")
    paths = coding_paths(mobile, check=False)
    print(f"mobile: {mobile.size} vertices, {len(paths.L)} white, max height {paths.H.max()}, "
          f"label range [{paths.L.min()}, {paths.L.max()}]")

    pm = mobile_to_map(mobile)
    prof = profile(pm)
    print(f"map: {pm.n_vertices} vertices, radius {prof.radius}, root depth {prof.delta}")
    print(f"radius / n^(1/(2 alpha)) = {prof.radius / n ** (1 / (2 * model.alpha)):.3f}")

    # the graph distance from v* is a shift of the label
    print(f"labels spread {paths.L.max() - paths.L.min() + 1} vs radius {prof.radius}")
    top = np.argsort(prof.counts)[::-1][:3]
    print("most populated distances:", ", ".join(f"{k} ({prof.counts[k]})" for k in sorted(top)))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20_000)
