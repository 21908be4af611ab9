"""Shared fuzz generators and independent oracles.

The oracles here deliberately take different computational routes from the
library code they check: naive O(n^2) pairwise sums for the FM, quantile
integration for the correlated exceedance probability.
"""

import math

import numpy as np
import pytest

from psychfm.data import ChoiceProblem, LotShape, expand_gamble_a, expand_gamble_b


def random_problem(rng, game_id=1, allow_amb=True):
    ha = int(rng.integers(-10, 31))
    la = int(rng.integers(-15, ha + 1))
    p_ha = int(rng.integers(0, 101)) / 100.0
    shape = [LotShape.NONE, LotShape.SYMM, LotShape.RSKEW,
             LotShape.LSKEW][int(rng.integers(0, 4))]
    if shape is LotShape.NONE:
        lot_num = 1
    elif shape is LotShape.SYMM:
        lot_num = int(rng.choice([3, 5, 7, 9]))
    else:
        lot_num = int(rng.integers(2, 9))
    lot_val = int(rng.integers(-10, 31))
    hb = int(rng.integers(-10, 41))
    p_hb = int(rng.integers(0, 101)) / 100.0
    if lot_num > 1 and p_hb == 1.0:
        p_hb = 0.9
    return ChoiceProblem(
        game_id=game_id, ha=ha, p_ha=p_ha, la=la, hb=hb, p_hb=p_hb,
        lot_val=lot_val, lot_num=lot_num, lot_shape=shape,
        corr=int(rng.choice([-1, 0, 1])),
        amb=int(rng.random() < 0.2) if allow_amb else 0,
    )


def random_gamble_pair(rng):
    p = random_problem(rng)
    return expand_gamble_a(p), expand_gamble_b(p), p


def _quantile(dist, u):
    """Smallest value whose CDF is >= u."""
    c = 0.0
    for v, pr in dist.outcomes:
        c += pr
        if c >= u:
            return v
    return dist.outcomes[-1][0]


def pbetter_oracle(a, b, corr):
    """P(vb > va) by product enumeration (corr=0) or quantile integration.

    For corr=+1 both gambles are read at the same quantile level; for
    corr=-1 b is read at the opposite level.  Integration is exact because
    both quantile functions are step functions over the merged breakpoints.
    """
    if corr == 0:
        return math.fsum(
            pa * pb
            for va, pa in a.outcomes
            for vb, pb in b.outcomes
            if vb > va
        )
    cuts = {0.0, 1.0}
    c = 0.0
    for _, pr in a.outcomes:
        c += pr
        cuts.add(min(c, 1.0))
    c = 0.0
    for _, pr in b.outcomes:
        c += pr
        cuts.add(min(c, 1.0))
        cuts.add(max(1.0 - c, 0.0))
    grid = sorted(cuts)
    total = 0.0
    for lo, hi in zip(grid, grid[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        va = _quantile(a, mid)
        vb = _quantile(b, mid if corr == 1 else 1.0 - mid)
        if vb > va:
            total += hi - lo
    return total


def fm_naive_predict(w0, w, V, active):
    """O(n^2) double-loop FM evaluation used as the prediction oracle."""
    act = list(active)
    pred = w0 + sum(w[i] for i in act)
    for ii in range(len(act)):
        for jj in range(ii + 1, len(act)):
            pred += float(np.dot(V[act[ii]], V[act[jj]]))
    return pred


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
