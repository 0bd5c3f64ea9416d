"""Exact min-cost rectangular assignment (Hungarian method with potentials).

Rows are matched to distinct columns; every row gets a column, so the matrix
needs at least as many columns as rows. Among equal reduced costs the lowest
column index is taken first, which keeps results deterministic.
"""
from __future__ import annotations

import math
from typing import Sequence


def min_cost_assignment(cost: Sequence[Sequence[float]]) -> list[int]:
    n = len(cost)
    if n == 0:
        return []
    m = len(cost[0])
    if m < n:
        raise ValueError(f"need at least as many columns as rows ({n} > {m})")
    if any(len(row) != m for row in cost):
        raise ValueError("ragged cost matrix")

    inf = math.inf
    # 1-indexed arrays; column 0 is the virtual root of each augmenting tree
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    owner = [0] * (m + 1)  # owner[j] = row matched to column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = cost[i0 - 1]
            delta = inf
            j1 = -1
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1

    result = [-1] * n
    for j in range(1, m + 1):
        if owner[j]:
            result[owner[j] - 1] = j - 1
    return result
