"""Bilinear system on R^3 projected to S^2: an eigenvalue sign test decides controllability.

A(u) has spectrum {1, +-i} and A(v) has {-1, +-i}, so the gaps between the real
eigenvalue and the real part of the complex pair have opposite signs. The
projected two-level system then reaches the whole sphere.
"""

import numpy as np

from orbitctl.bilinear import a_of_u, eigen3, project_sphere, theorem_b_check, theorem_b_fixture
from orbitctl.flow import IntegratorOptions
from orbitctl.manifold import random_point
from orbitctl.reach import ReachOptions, coverage, reach_sample

sys3, u, v = theorem_b_fixture()
for name, level in (("u", u), ("v", v)):
    e = eigen3(a_of_u(sys3, level))
    print(f"A({name}) real eigenvalue {e.real_eigenvalues[0]:+.6f}, complex pair {np.round(e.complex_pair, 6) + 0.0}")

verdict = theorem_b_check(sys3, u, v, larc_point=[0.3, 0.5, 0.2])
print(f"gap product {verdict.product:+.9f}, sufficient: {verdict.controllable_sufficient}, LARC: {verdict.larc_holds}")

sp = project_sphere(sys3, [u, v])
q0 = random_point(sp.manifold, np.random.default_rng(0))
for horizon in (10.0, 50.0, 200.0):
    cloud = reach_sample(sp, q0, ReachOptions(horizon, 300, legs_per_sample=40, integrator=IntegratorOptions(1e-2)), seed=0)
    print(f"horizon {horizon:>5}: sphere coverage {coverage(sp.manifold, cloud.points, 12):.3f} (12x12 cells)")
