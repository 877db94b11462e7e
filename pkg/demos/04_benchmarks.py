# # The Erlang race and the two-chain game
#
# ## Erlang
#
# From l1, action `a` enters 30 stages of rate 10 and `b` takes a lossy
# shortcut.  Rates up to 10 mean the normed horizon is 70 for T = 7.

# %%
import time

from ctmg_nets import (
    REACH,
    SAFE,
    SolverConfig,
    build_chain_game,
    build_erlang,
    choose_epsilon,
    count_switch_points,
    extract_strategy,
    normalise,
    solve,
)

normed, H, lam = normalise(build_erlang(), 7)
print("lambda", lam, "scaled horizon", H)
t0 = time.perf_counter()
res = solve(normed, SolverConfig(3, float(H), precision=1e-6), record="none")
print(f"level 3: {res.n_intervals} intervals in {time.perf_counter() - t0:.1f}s, value {res.value('l1'):.10f}")
for loc, t, before, after in count_switch_points(extract_strategy(res, REACH)).points:
    print(f"switch at {loc}: {before} -> {after} at original time {t / float(lam):.4f}")

# Level 3 needs far fewer intervals than level 2 for the same precision.

# %%
for p in (1e-4, 1e-6, 1e-8, 1e-10):
    print(p, [choose_epsilon(k, float(H), p, guard=None)[1] for k in (2, 3, 4)])

# ## Two interleaved chains
#
# Each player can stay on their own chain or cross over.  Which is better
# depends on how much time is left, so many locations switch more than once.

# %%
game, H, lam = normalise(build_chain_game(), 10)
res = solve(game, SolverConfig(3, float(H), precision=1e-6), record="none")
total = sum(count_switch_points(extract_strategy(res, p)).total for p in (REACH, SAFE))
print(f"{res.n_intervals} intervals, {total} switch points")
