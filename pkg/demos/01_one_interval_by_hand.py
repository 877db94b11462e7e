# # One interval of the running example, level by level
#
# The running example has a Safe location `lS` and a Reach location `lR`,
# each with two actions.  We take the values at t = 1.2 as given and build
# the approximations on [1.1, 1.2] by hand, the same way the solver does.

# %%
import numpy as np

from ctmg_nets import build_running_example, step_level, step_single
from ctmg_nets.poly import polyval

game = build_running_example()
anchors = {"G": 1, "l": 0.244, "lR": 0.107, "lS": 0.075, "bot": 0}
eps = 0.1

# ## Level 1: one gradient per location
#
# The best action at t = 1.2 fixes a constant slope for the whole interval.

# %%
values, rep = step_single(game, anchors, eps, t=1.2)
for loc in ("lR", "lS"):
    print(f"{loc}: slope {rep.gradients[loc]:.4f} using {rep.envelopes[loc].actions()}")

# ## Level 2: the optimum can change inside the interval
#
# Feeding the linear level-1 values back into the action qualities makes
# `b` overtake `a` at lR at tau = 5/63 before the left end.

# %%
pieces, _ = step_level(game, 2, anchors, eps, t=1.2)
for pc in pieces["lR"]:
    print(f"tau in [{pc.tau_lo:.6f}, {pc.tau_hi:.6f}]  action {pc.action}  coeffs {np.round(pc.coeffs, 9)}")
print("5/63 =", 5 / 63)

# The two quadratics meet continuously at the crossing.

# %%
a, b = pieces["lR"]
print(polyval(a.coeffs, a.tau_hi), polyval(b.coeffs, b.tau_lo))

# ## Levels 3 and 4
#
# Higher levels repeat the construction on the previous level's pieces.  The
# value at the left end barely moves, which is the point: each level gains
# one order of accuracy per interval.

# %%
for k in (1, 2, 3, 4):
    pcs, _ = step_level(game, k, anchors, eps, t=1.2)
    last = pcs["lR"][-1]
    print(k, len(pcs["lR"]), "pieces, lR at t=1.1:", polyval(last.coeffs, eps))
