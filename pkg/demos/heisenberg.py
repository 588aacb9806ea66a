"""Heisenberg system: two generators whose bracket supplies the missing direction.

A unit square loop X, Y, -X, -Y moves the state by t^2 along e3, and a short
general chronological product already has a full-rank differential.
"""

import numpy as np

from orbitctl.fields import builtin
from orbitctl.flow import Schedule, chrono_map, chrono_rank, general_schedule
from orbitctl.lie import Leaf, larc_check, parse_word

sys_ = builtin("heisenberg")
q = np.zeros(3)

rep = larc_check(sys_, q, max_depth=1)
print(f"LARC at the origin: dim {rep.achieved_dim} from words {[str(w) for w in rep.basis_words]}")

for t in (0.2, 0.1, 0.05):
    loop = Schedule(((0, t), (1, t), (0, -t), (1, -t)))
    end = chrono_map(sys_, loop, q)
    print(f"commutator loop t={t:<5} endpoint {np.round(end, 8) + 0.0}  (t^2 = {t * t:.4f})")

gs = general_schedule(sys_, q, [Leaf(0), Leaf(1), parse_word("[0,1]")], t_scale=0.1, seed=0)
print(f"general product with {len(gs.schedule)} legs: rank {gs.achieved_rank}, retries {gs.retries_used}")
print("rank of the loop alone:", chrono_rank(sys_, Schedule(((0, 0.1), (1, 0.1), (0, -0.1), (1, -0.1))), q))
