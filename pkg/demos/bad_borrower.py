"""
The bad-borrower game
=====================

A borrower takes loans of at least one dollar; each loan is repaid at
rate alpha with probability p.  However the borrower picks the loan sizes,
the lender expects to hand out about n/(p*alpha) + n dollars before n come
back.
"""
from rebackoff.badborrower import GameParams, borrowed_means, make_strategy, play_finite, play_infinite

params = GameParams(p=0.5, alpha=0.5)
n = 1000
g = play_finite(params, make_strategy("doubling"), n, seed=0)
print(f"one doubling play: {g.iterations} loans, borrowed {g.borrowed_total:.0f}, repaid {g.repaid_total:.0f}")

means = borrowed_means(params, n, plays=300, seed=1)
print(f"mean borrowed over 300 plays (bound {params.finite_bound(n):.0f}):")
for name, m in means.items():
    print(f"  {name:>16}: {m:8.0f}")

rep = play_infinite(params, make_strategy("constant-1"), 10_000, seed=0)
print(f"infinite game, unit loans: {rep.count} of {rep.iterations} iterations are measurement points")
