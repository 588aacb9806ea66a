"""Example 2 on T^2: LARC and closed orbits everywhere, but not controllable.

From p1 = (pi/2, 0) forward trajectories never enter cos(phi) > 0: the phi
components of the generators at p1 lie on one side, so they are not ample.
"""

import math

import numpy as np

from orbitctl.fields import builtin
from orbitctl.flow import IntegratorOptions
from orbitctl.lie import larc_check
from orbitctl.reach import ReachOptions, ample_check, find_closed_orbit, reach_sample

sys_ = builtin("example2")
p1 = np.array([math.pi / 2, 0.0])

print("LARC at p1:", larc_check(sys_, p1).larc_holds)
orb = find_closed_orbit(sys_, 2, p1, 7.0)
print(f"closed orbit of V3 through p1: period {orb.period:.10f} (2 pi = {2 * math.pi:.10f})")

vecs = np.array([g(p1) for g in sys_.generators])
print("phi components at p1:", vecs[:, 0])
print("phi line positively spanned:", ample_check(vecs[:, :1]).positively_spanning)

cloud = reach_sample(sys_, p1, ReachOptions(20.0, 2000, integrator=IntegratorOptions(5e-2)), seed=0)
print(f"{len(cloud)} recorded points, largest cos(phi) = {np.max(np.cos(cloud.points[:, 0])):.2e}")
