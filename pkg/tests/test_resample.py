from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairsel.data import DatasetTable, Example, group_statistics
from fairsel.model import InputError
from fairsel.resample import (_largest_remainder, plan_rebalance, rebalance)


def ex(i, s, y):
    return Example(i, np.zeros(1), y, -1, s)


def stats_for(p_s, p_z, n=1000):
    """A table whose empirical cell frequencies are exactly p_s x p_z."""
    ids, ss, ys = [], [], []
    i = 0
    for s, ps in enumerate(p_s):
        for z, pz in enumerate(p_z):
            count = int(round(ps * pz * n))
            for _ in range(count):
                ids.append(i); ss.append(s); ys.append(z); i += 1
    m = len(ids)
    table = DatasetTable(np.array(ids), np.zeros((m, 1)),
                         np.array(ys), np.full(m, -1), np.array(ss))
    return group_statistics(table)


def test_largest_remainder_exact_split():
    np.testing.assert_array_equal(_largest_remainder(np.array([1.0, 2.0, 3.0]), 6),
                                  [1, 2, 3])


def test_largest_remainder_rounds_biggest_fractions_up():
    got = _largest_remainder(np.array([1.2, 1.5, 1.3]), 4)
    np.testing.assert_array_equal(got, [1, 2, 1])


def test_largest_remainder_tie_goes_to_lower_index():
    got = _largest_remainder(np.array([0.5, 0.5]), 1)
    np.testing.assert_array_equal(got, [1, 0])


def test_plan_targets_product_of_marginals():
    stats = stats_for([0.5, 0.5], [0.5, 0.5])
    batch = [ex(i, s=0, y=0) for i in range(6)] + [ex(6, 1, 1), ex(7, 1, 1)]
    plan = plan_rebalance(batch, stats)
    targets = {(c.s, c.z): c.target for c in plan.cells}
    assert targets == {(0, 0): 4, (0, 1): 0, (1, 0): 0, (1, 1): 4}
    # quota of the two empty cells was redistributed to the populated ones


def test_plan_with_all_cells_present():
    stats = stats_for([0.5, 0.5], [0.25, 0.75])
    batch = [ex(0, 0, 0), ex(1, 0, 1), ex(2, 1, 0), ex(3, 1, 1)] * 2
    batch = [ex(i, e.s, e.y_observed) for i, e in enumerate(batch)]
    plan = plan_rebalance(batch, stats)
    targets = {(c.s, c.z): c.target for c in plan.cells}
    assert sum(targets.values()) == 8
    assert targets[(0, 1)] == 3 and targets[(1, 1)] == 3
    assert targets[(0, 0)] + targets[(1, 0)] == 2


def test_plan_empty_batch_rejected():
    with pytest.raises(InputError):
        plan_rebalance([], stats_for([1.0], [1.0]))


def test_rebalance_preserves_batch_size_and_matches_targets():
    stats = stats_for([0.5, 0.5], [0.5, 0.5])
    batch = ([ex(i, 0, 0) for i in range(10)]
             + [ex(10 + i, 0, 1) for i in range(2)]
             + [ex(20 + i, 1, 0) for i in range(2)]
             + [ex(30 + i, 1, 1) for i in range(2)])
    out = rebalance(batch, stats, np.random.default_rng(0))
    assert len(out) == len(batch)
    counts = Counter((e.s, e.y_observed) for e in out)
    plan = plan_rebalance(batch, stats)
    for cell in plan.cells:
        assert counts.get((cell.s, cell.z), 0) == cell.target


def test_rebalance_outputs_only_input_examples():
    stats = stats_for([0.5, 0.5], [0.5, 0.5])
    batch = [ex(i, i % 2, (i // 2) % 2) for i in range(8)]
    out = rebalance(batch, stats, np.random.default_rng(1))
    ids = {e.id for e in batch}
    assert all(e.id in ids for e in out)


def test_rebalance_identity_when_already_balanced():
    stats = stats_for([0.5, 0.5], [0.5, 0.5])
    batch = [ex(i, i % 2, (i // 2) % 2) for i in range(8)]
    out = rebalance(batch, stats, np.random.default_rng(2))
    assert sorted(e.id for e in out) == sorted(e.id for e in batch)


def test_rebalance_deterministic_under_seed():
    stats = stats_for([0.3, 0.7], [0.5, 0.5])
    rng = np.random.default_rng
    batch = [ex(i, i % 2, i % 3 % 2) for i in range(16)]
    a = rebalance(batch, stats, rng(7))
    b = rebalance(batch, stats, rng(7))
    assert [e.id for e in a] == [e.id for e in b]


@settings(deadline=None, max_examples=30)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                min_size=1, max_size=40),
       st.integers(0, 2**31 - 1))
def test_rebalance_size_invariant_property(cells, seed):
    stats = stats_for([0.5, 0.5], [0.5, 0.5])
    batch = [ex(i, s, y) for i, (s, y) in enumerate(cells)]
    out = rebalance(batch, stats, np.random.default_rng(seed))
    assert len(out) == len(batch)
