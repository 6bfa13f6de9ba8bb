"""Channel-balanced workload schedule.

Partition K weighted items into N groups of near-equal total weight: sort
descending, reorder in serpentine blocks of N, deal block positions round
robin into the groups, then repeatedly move the lightest item of the heaviest
group into the lightest group while that narrows the spread.

``optimal_partition_oracle`` is an exact branch-and-bound used to measure how
far the heuristic lands from the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import BudgetError, ConfigError, NumericDomainError

__all__ = [
    "Partition",
    "PartitionStats",
    "serpentine_order",
    "seed_sublists",
    "finetune",
    "cbws_partition",
    "contiguous_partition",
    "optimal_partition_oracle",
    "partition_stats",
    "ORACLE_MAX_ITEMS",
]

ORACLE_MAX_ITEMS = 16


def _check_weights(weights) -> tuple:
    w = tuple(float(x) for x in weights)
    if not w:
        raise ConfigError("need at least one item")
    if not all(math.isfinite(x) for x in w):
        raise NumericDomainError("item weights must be finite")
    if any(x < 0 for x in w):
        raise NumericDomainError("item weights must be non-negative; map signed magnitudes first")
    return w


def _check_groups(n_groups: int) -> int:
    if n_groups < 1:
        raise ConfigError(f"number of groups must be >= 1, got {n_groups}")
    return int(n_groups)


@dataclass(frozen=True)
class Partition:
    """Disjoint groups of item indices covering ``range(len(weights))``."""

    sublists: tuple
    weights: tuple

    def __post_init__(self):
        subs = tuple(tuple(int(i) for i in s) for s in self.sublists)
        object.__setattr__(self, "sublists", subs)
        object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))
        seen = sorted(i for s in subs for i in s)
        if seen != list(range(len(self.weights))):
            raise ConfigError("partition groups must cover every item exactly once")

    @property
    def n_groups(self) -> int:
        return len(self.sublists)

    @property
    def sums(self) -> tuple:
        return tuple(math.fsum(self.weights[i] for i in s) for s in self.sublists)

    @property
    def has_empty(self) -> bool:
        return any(len(s) == 0 for s in self.sublists)

    def assignment(self) -> list:
        """Group index of every item."""
        out = [0] * len(self.weights)
        for j, s in enumerate(self.sublists):
            for i in s:
                out[i] = j
        return out

    def to_lists(self) -> list:
        return [list(s) for s in self.sublists]


class PartitionStats(NamedTuple):
    sums: tuple
    diff: float
    max_sum: float
    balance: float


def partition_stats(p: Partition) -> PartitionStats:
    sums = p.sums
    hi, lo = max(sums), min(sums)
    balance = 1.0 if hi == 0 else (math.fsum(sums) / len(sums)) / hi
    return PartitionStats(sums, hi - lo, hi, balance)


def serpentine_order(items: Sequence, n_groups: int) -> list:
    """Boustrophedon reorder of a descending list in blocks of ``n_groups``.

    Even blocks keep their order, odd blocks are reversed.  The tail is padded
    with ``None`` placeholders so every block is full.
    """
    n = _check_groups(n_groups)
    items = list(items)
    items += [None] * (-len(items) % n)
    out = []
    for b in range(len(items) // n):
        block = items[b * n : (b + 1) * n]
        if b % 2:
            # None placeholders stay at the tail of a reversed block
            real = [x for x in block if x is not None]
            block = real[::-1] + [None] * (n - len(real))
        out.extend(block)
    return out


def seed_sublists(ordered: Sequence, n_groups: int, weights: Sequence[float]) -> Partition:
    """Deal position ``N*i + j`` of the serpentine list to group ``j``."""
    n = _check_groups(n_groups)
    groups: List[list] = [[] for _ in range(n)]
    for pos, item in enumerate(ordered):
        if item is not None:
            groups[pos % n].append(item)
    return Partition(tuple(groups), tuple(weights))


def finetune(p: Partition, iterations: int, history: Optional[list] = None) -> Partition:
    """Move the smallest item of the heaviest group to the lightest group
    while it is smaller than half the max-min spread, for at most
    ``iterations`` rounds.  Spreads seen at the start of each round are
    appended to ``history`` when given.
    """
    w = p.weights
    groups = [list(s) for s in p.sublists]
    for _ in range(iterations):
        sums = [math.fsum(w[i] for i in g) for g in groups]
        hi = max(range(len(sums)), key=lambda j: (sums[j], -j))
        lo = min(range(len(sums)), key=lambda j: (sums[j], j))
        diff = sums[hi] - sums[lo]
        if history is not None:
            history.append(diff)
        if not groups[hi]:
            break
        smallest = min(groups[hi], key=lambda i: (w[i], i))
        if diff / 2 > w[smallest]:
            groups[hi].remove(smallest)
            groups[lo].append(smallest)
        else:
            break
    return Partition(tuple(groups), w)


def cbws_partition(weights: Sequence[float], n_groups: int, iterations: Optional[int] = None) -> Partition:
    """Full schedule: sort, serpentine, seed, fine-tune.  ``iterations`` defaults to K."""
    w = _check_weights(weights)
    n = _check_groups(n_groups)
    order = sorted(range(len(w)), key=lambda i: (-w[i], i))
    p = seed_sublists(serpentine_order(order, n), n, w)
    return finetune(p, len(w) if iterations is None else iterations)


def contiguous_partition(weights: Sequence[float], n_groups: int) -> Partition:
    """Default channel-order split into ``n_groups`` runs of near-equal length."""
    w = tuple(float(x) for x in weights)
    n = _check_groups(n_groups)
    chunks = np.array_split(np.arange(len(w)), n)
    return Partition(tuple(tuple(c.tolist()) for c in chunks), w)


def _optimal_max_sum(w: tuple, n: int, tol: float) -> float:
    """Minimum achievable max group sum, branch-and-bound over sorted items."""
    order = sorted(w, reverse=True)
    K = len(order)
    suffix = [math.fsum(order[k:]) for k in range(K + 1)]
    lower = max(order[0], suffix[0] / n)
    best = max(cbws_partition(w, n).sums)

    def rec(k: int, sums: list, used: int) -> bool:
        nonlocal best
        if k == K:
            best = max(sums)
            return best <= lower + tol
        if math.fsum(max(0.0, best - s) for s in sums) < suffix[k] - tol:
            return False
        tried = set()
        for j in range(min(used + 1, n)):
            if sums[j] in tried:
                continue
            tried.add(sums[j])
            if sums[j] + order[k] >= best - tol:
                continue
            nxt = sums.copy()
            nxt[j] += order[k]
            if rec(k + 1, nxt, max(used, j + 1)):
                return True
        return False

    if best > lower + tol:
        rec(0, [0.0] * n, 0)
    return best


def _fits(items_desc: list, loads: list, cap: float, tol: float) -> bool:
    """Can ``items_desc`` be added to bins with ``loads`` without exceeding ``cap``?"""
    suffix = [math.fsum(items_desc[k:]) for k in range(len(items_desc) + 1)]

    def rec(k: int, sums: list) -> bool:
        if k == len(items_desc):
            return True
        if math.fsum(max(0.0, cap - s) for s in sums) < suffix[k] - tol:
            return False
        tried = set()
        for j, s in enumerate(sums):
            if s in tried or s + items_desc[k] > cap:
                continue
            tried.add(s)
            nxt = sums.copy()
            nxt[j] += items_desc[k]
            if rec(k + 1, nxt):
                return True
        return False

    return rec(0, list(loads))


def optimal_partition_oracle(weights: Sequence[float], n_groups: int) -> Partition:
    """Exact minimiser of the largest group sum.

    Among optimal partitions, returns the lexicographically smallest
    assignment vector (item order, group labels).
    """
    w = _check_weights(weights)
    n = _check_groups(n_groups)
    if len(w) > ORACLE_MAX_ITEMS:
        raise BudgetError(f"oracle handles at most {ORACLE_MAX_ITEMS} items, got {len(w)}")
    tol = 1e-9 * max(1.0, math.fsum(w))
    cap = _optimal_max_sum(w, n, tol) + tol

    # fix labels item by item, smallest label whose completion still fits
    loads = [0.0] * n
    assign = []
    used = 0
    for k, x in enumerate(w):
        rest = sorted(w[k + 1 :], reverse=True)
        for j in range(min(used + 1, n)):
            if loads[j] + x > cap:
                continue
            trial = loads.copy()
            trial[j] += x
            if _fits(rest, trial, cap, tol):
                loads = trial
                assign.append(j)
                used = max(used, j + 1)
                break
        else:  # pragma: no cover - cap is achievable by construction
            raise RuntimeError("oracle failed to realise its own optimum")
    groups: List[list] = [[] for _ in range(n)]
    for i, j in enumerate(assign):
        groups[j].append(i)
    return Partition(tuple(groups), w)
