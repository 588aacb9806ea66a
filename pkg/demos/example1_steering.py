"""Example 1 on T^3: LARC fails everywhere, yet every point is reachable.

All generators share the drift along x and their y-parts commute, so brackets
span at most two directions. Still, a staircase control that switches u while
x passes through each bump places every y-coordinate exactly.
"""

import numpy as np

from orbitctl.fields import builtin
from orbitctl.flow import IntegratorOptions
from orbitctl.lie import larc_check
from orbitctl.manifold import random_point
from orbitctl.reach import coverage, steer_example1, steering_cloud

n = 3
sys_ = builtin("example1", {"n": n})
rng = np.random.default_rng(1)

dims = [larc_check(sys_, random_point(sys_.manifold, rng), max_depth=4).achieved_dim for _ in range(20)]
print(f"bracket dimension at 20 random points (depth 4): max {max(dims)} < {n}")

for target in ([0.25, 0.6], [0.9, 0.1]):
    end = steer_example1(n, target)
    print(f"steer to y = {target}: endpoint {np.round(end, 6)}")

cloud = steering_cloud(n, 2000, seed=0, opts=IntegratorOptions(1e-2))
print(f"steered cloud of 2000 points covers {coverage(sys_.manifold, cloud, 8):.3f} of the 8^3 grid")
