# # Observed accuracy of each level
#
# Halving eps should cut the error at t = 0 by 2^k at level k.  The
# reference is a very fine level-1 run with one Richardson step.  The fine
# step here (1e-5) keeps the script quick; the acceptance suite uses 1e-6.

# %%
from ctmg_nets import build_running_example, convergence_study

game = build_running_example()
eps_list = (0.1, 0.05, 0.025, 0.0125)
study = convergence_study(game, 2.0, (1, 2, 3), eps_list, ref_eps=1e-5)

print("level  " + "  ".join(f"{e:>9g}" for e in eps_list) + "   order")
for k in study.levels:
    errs = "  ".join(f"{study.errors[(k, e)]:9.2e}" for e in eps_list)
    print(f"{k:>5}  {errs}   {study.orders[k]:.2f}")

