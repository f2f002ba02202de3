"""The bad-borrower game.

Each iteration the borrower takes a loan of at least one dollar; with
probability ``p`` the lender is then repaid an ``alpha`` fraction of that
loan.  In the finite game play stops once ``n`` dollars have come back.
Money is real-valued throughout.

A strategy is a callable ``strategy(ledger, limit) -> amount`` that sees
the full ledger of earlier iterations.  Strategies that ignore the ledger
may also expose ``schedule(k, limit)`` returning their first ``k`` loans,
which lets plays run vectorized.
"""
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GameParams:
    p: float = 0.5
    alpha: float = 0.5

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    def finite_bound(self, n):
        """n/(p*alpha) + n."""
        return n / (self.p * self.alpha) + n


@dataclass
class GameResult:
    borrowed: list = field(default_factory=list)
    repaid: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.borrowed)

    @property
    def borrowed_total(self):
        return float(math.fsum(self.borrowed))

    @property
    def repaid_total(self):
        return float(math.fsum(self.repaid))

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "borrowed_total": self.borrowed_total,
            "repaid_total": self.repaid_total,
        }


class BorrowError(ValueError):
    """A strategy asked for a loan outside [1, limit]."""


# -- strategies --------------------------------------------------------------


class ConstantOne:
    name = "constant-1"

    def __call__(self, ledger, limit):
        return 1.0

    def schedule(self, k, limit):
        return np.ones(k)


class Doubling:
    name = "doubling"

    def __call__(self, ledger, limit):
        return float(min(2.0 ** min(ledger.iterations, 1023), limit))

    def schedule(self, k, limit):
        e = np.minimum(np.arange(k, dtype=np.float64), 1023)
        return np.minimum(np.exp2(e), limit)


class AlwaysMax:
    name = "always-n"

    def __call__(self, ledger, limit):
        return float(limit)

    def schedule(self, k, limit):
        return np.full(k, float(limit))


class AdaptiveLedger:
    """Borrows big right after being repaid and small after a miss, and
    near the end borrows just what a repayment would need to finish."""

    name = "adaptive-ledger"

    def __init__(self, target=None):
        self.target = target

    def __call__(self, ledger, limit):
        if not ledger.iterations:
            return 1.0
        if ledger.repaid[-1] > 0:
            amount = 2 * ledger.borrowed[-1]
        else:
            amount = max(1.0, ledger.borrowed[-1] / 2)
        if self.target is not None:
            left = self.target - ledger.repaid_total
            amount = min(amount, max(1.0, left))
        return float(min(amount, limit))


STRATEGIES = {
    "constant-1": ConstantOne,
    "doubling": Doubling,
    "always-n": AlwaysMax,
    "adaptive-ledger": AdaptiveLedger,
}


def make_strategy(name, target=None):
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}")
    if name == "adaptive-ledger":
        return AdaptiveLedger(target)
    return STRATEGIES[name]()


def _check(amount, limit):
    if not amount >= 1 or amount > limit:
        raise BorrowError(f"loan must lie in [1, {limit}], got {amount}")


# -- plays -------------------------------------------------------------------


def play_finite(params, strategy, n, seed=0):
    """Play until at least ``n`` dollars have been repaid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if hasattr(strategy, "schedule"):
        return _finite_vectorized(params, strategy, n, rng)
    ledger = GameResult()
    repaid = 0.0
    coins = iter(())
    while repaid < n:
        amount = float(strategy(ledger, n))
        _check(amount, n)
        coin = next(coins, None)
        if coin is None:
            coins = iter(rng.random(4096).tolist())
            coin = next(coins)
        back = params.alpha * amount if coin < params.p else 0.0
        ledger.borrowed.append(amount)
        ledger.repaid.append(back)
        repaid += back
    return ledger


def _finite_vectorized(params, strategy, n, rng):
    k = 256
    done = 0
    borrowed, repaid = [], []
    total = 0.0
    while True:
        # the schedule is recomputed from 0 so position-dependent strategies line up
        amounts = strategy.schedule(done + k, n)[done:]
        if np.any(amounts < 1) or np.any(amounts > n):
            raise BorrowError(f"loan must lie in [1, {n}]")
        back = np.where(rng.random(k) < params.p, params.alpha * amounts, 0.0)
        cum = total + np.cumsum(back)
        hit = np.flatnonzero(cum >= n)
        stop = int(hit[0]) + 1 if len(hit) else k
        borrowed.extend(amounts[:stop].tolist())
        repaid.extend(back[:stop].tolist())
        if len(hit):
            return GameResult(borrowed, repaid)
        total = float(cum[-1])
        done += k
        k *= 2


@dataclass(frozen=True)
class InfiniteReport:
    iterations: int
    points: np.ndarray  # iterations r (1-based) where repaid >= (p*alpha/2) * borrowed
    largest_gap: int

    @property
    def count(self):
        return len(self.points)

    @property
    def last(self):
        return int(self.points[-1]) if len(self.points) else 0


def play_infinite(params, strategy, iteration_cap, seed=0, limit=2.0**30):
    """Truncated infinite game.  ``limit`` caps a single loan."""
    rng = np.random.default_rng(seed)
    k = int(iteration_cap)
    if k <= 0:
        return InfiniteReport(0, np.zeros(0, dtype=np.int64), 0)
    if hasattr(strategy, "schedule"):
        amounts = strategy.schedule(k, limit)
        if np.any(amounts < 1) or np.any(amounts > limit):
            raise BorrowError(f"loan must lie in [1, {limit}]")
        back = np.where(rng.random(k) < params.p, params.alpha * amounts, 0.0)
    else:
        game = GameResult()
        coins = rng.random(k)
        for i in range(k):
            amount = float(strategy(game, limit))
            _check(amount, limit)
            game.borrowed.append(amount)
            game.repaid.append(params.alpha * amount if coins[i] < params.p else 0.0)
        amounts, back = np.array(game.borrowed), np.array(game.repaid)
    ok = np.cumsum(back) >= (params.p * params.alpha / 2) * np.cumsum(amounts)
    points = np.flatnonzero(ok) + 1
    edges = np.concatenate(([0], points, [k]))
    return InfiniteReport(k, points, int(np.diff(edges).max()))


def borrowed_means(params, n, plays, seed=0, names=tuple(STRATEGIES)):
    """Mean borrowed total per strategy over ``plays`` finite games."""
    ss = np.random.SeedSequence(seed)
    out = {}
    for name, child in zip(names, ss.spawn(len(names))):
        seeds = child.spawn(plays)
        totals = [play_finite(params, make_strategy(name, n), n, s).borrowed_total for s in seeds]
        out[name] = float(np.mean(totals))
    return out
