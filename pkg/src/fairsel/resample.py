"""Selection-bias correction: resample each selected sub-batch toward
independent group/label cell counts.

Targets per (s, z) cell are p(s)*p(z)*N_b with p(s), p(z) measured on the
full training table; z is proxied by the observed label of the selected
examples. Over-full cells drop members at random, under-full cells
bootstrap from their own members, and quota assigned to cells with no
members present is redistributed to the non-empty cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Example, GroupStats
from .model import InputError


@dataclass
class CellPlan:
    s: int
    z: int
    observed: int
    target: int

    @property
    def action(self) -> str:
        if self.observed > self.target:
            return f"drop {self.observed - self.target}"
        if self.observed < self.target:
            return f"bootstrap {self.target - self.observed}"
        return "keep"


@dataclass
class RebalancePlan:
    cells: list
    n_b: int


def _largest_remainder(raw: np.ndarray, total: int) -> np.ndarray:
    """Round nonnegative quotas to integers summing exactly to `total`."""
    floors = np.floor(raw).astype(int)
    short = total - floors.sum()
    if short > 0:
        remainders = raw - floors
        # ties broken by cell index for determinism
        order = np.lexsort((np.arange(len(raw)), -remainders))
        floors[order[:short]] += 1
    return floors


def plan_rebalance(sub_batch: list, stats: GroupStats, n_b: int | None = None) -> RebalancePlan:
    if not sub_batch:
        raise InputError("empty sub_batch")
    n_b = n_b or len(sub_batch)
    ng, nk = len(stats.p_s), len(stats.p_z)
    observed = np.zeros((ng, nk), dtype=int)
    for ex in sub_batch:
        observed[ex.s, ex.y_observed] += 1
    raw = np.outer(stats.p_s, stats.p_z).ravel() * n_b
    targets = _largest_remainder(raw, n_b)
    # cells with quota but nothing to bootstrap from hand their quota to
    # the populated cells, proportionally, again by largest remainder
    present = observed.ravel() > 0
    shortfall = int(targets[~present].sum())
    targets[~present] = 0
    if shortfall > 0:
        raw_present = raw.copy()
        raw_present[~present] = 0.0
        total = raw_present.sum()
        if total == 0:
            raw_present[present] = 1.0
            total = raw_present.sum()
        extra = _largest_remainder(raw_present / total * shortfall, shortfall)
        targets = targets + extra
    cells = [CellPlan(s, z, int(observed[s, z]), int(targets[s * nk + z]))
             for s in range(ng) for z in range(nk)]
    return RebalancePlan(cells, n_b)


def rebalance(sub_batch: list, stats: GroupStats,
              rng: np.random.Generator) -> list[Example]:
    """Return a batch of exactly len(sub_batch) examples with cell counts
    matched to the rebalance plan. Bootstrap never invents data: every
    output example comes from the input sub_batch."""
    plan = plan_rebalance(sub_batch, stats)
    by_cell: dict = {}
    for ex in sorted(sub_batch, key=lambda e: e.id):
        by_cell.setdefault((ex.s, ex.y_observed), []).append(ex)
    out: list[Example] = []
    for cell in plan.cells:
        members = by_cell.get((cell.s, cell.z), [])
        if not members:
            continue
        if cell.observed > cell.target:
            keep = rng.choice(cell.observed, size=cell.target, replace=False)
            out.extend(members[i] for i in sorted(keep))
        else:
            out.extend(members)
            if cell.observed < cell.target:
                extra = rng.choice(cell.observed,
                                   size=cell.target - cell.observed, replace=True)
                out.extend(members[i] for i in extra)
    return out
