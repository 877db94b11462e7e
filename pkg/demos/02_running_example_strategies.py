# # Solving the running example and checking the strategies
#
# Solve on [0, 4], read off when each player changes action, then check the
# extracted strategies three ways: a best-response solve, an exact transient
# analysis, and Monte Carlo simulation.

# %%
from ctmg_nets import (
    REACH,
    SAFE,
    SolverConfig,
    build_running_example,
    count_switch_points,
    evaluate_best_response,
    extract_strategy,
    simulate,
    solve,
    transient_fixed,
)

game = build_running_example()
res = solve(game, SolverConfig(2, 4.0, precision=1e-6))
print(f"{res.n_intervals} intervals, eps={res.epsilon:.3g}, bound={res.bound:.2e}")
print("value at lS:", res.value())

# ## Switch points
#
# Close to the horizon the Reach player prefers the direct shot `a` at lR;
# with more time left the detour `b` through `l` pays off.

# %%
reach, safe = extract_strategy(res, REACH), extract_strategy(res, SAFE)
for s in (reach, safe):
    for loc, t, before, after in count_switch_points(s).points:
        print(f"{s.player} switches at {loc}: {before} -> {after} at t = {t:.4f}")

# ## How good is the Reach strategy?
#
# Fix it and let Safe respond optimally.  The loss against the optimum is
# bounded by (c_k + d_k) eps^k T.

# %%
br = evaluate_best_response(game, reach, 2, precision=1e-6)
print("optimum", res.value(), "fixed Reach vs best response", br.value)
print("allowed loss", res.bound + res.strategy_bound)

# ## Both strategies fixed: exact and sampled

# %%
exact = transient_fixed(game, reach, safe, 4.0)
sim = simulate(game, reach, safe, 4.0, 200_000, seed=1)
print("transient", exact.value("lS"))
print(f"simulated {sim.estimate:.5f}, 95% CI [{sim.ci[0]:.5f}, {sim.ci[1]:.5f}]")

# ## The value function between grid points

# %%
f = res.value_function("lR")
for t in (0.0, 1.0, 1.123, 2.0, 3.0, 4.0):
    print(f"p(lR, {t}) = {f(t):.6f}")
