"""Shared builders and independent naive-loop oracles.

The oracles recompute group means and both estimators with plain Python
loops over the raw rows, staying independent of the vectorised paths
they check.
"""

from __future__ import annotations

import numpy as np
import pytest

from memprof.panel import NEVER, Panel


def make_panel(checkpoints, groups_per_instance, outcomes, treatment_grid=None, ids=None):
    """Assemble a Panel from plain lists."""
    groups = [NEVER if g == "inf" or g == NEVER else int(g) for g in groups_per_instance]
    if treatment_grid is None:
        treatment_grid = sorted({g for g in groups if g != NEVER})
    if ids is None:
        ids = [f"x{i}" for i in range(len(groups))]
    return Panel(
        checkpoints=np.asarray(checkpoints, dtype=np.int64),
        treatment_grid=np.asarray(treatment_grid, dtype=np.int64),
        instance_ids=tuple(ids),
        groups=np.asarray([float(g) for g in groups], dtype=np.float64),
        outcomes=np.asarray(outcomes, dtype=np.float64),
    )


def random_panel(rng: np.random.Generator, n_checkpoints=None, n_groups=None,
                 max_group_size=12, n_validation=None) -> Panel:
    """A small random balanced panel for property tests."""
    n_checkpoints = n_checkpoints or int(rng.integers(3, 13))
    checkpoints = np.sort(rng.choice(np.arange(0, 60), size=n_checkpoints, replace=False))
    # treatment inside (first, last] so every group has a baseline and a cell
    eligible = np.arange(int(checkpoints[0]) + 1, int(checkpoints[-1]) + 1)
    n_groups = n_groups or int(rng.integers(1, min(5, len(eligible)) + 1))
    treatment_grid = np.sort(rng.choice(eligible, size=n_groups, replace=False))

    groups: list[float] = []
    for g in treatment_grid:
        groups.extend([float(g)] * int(rng.integers(2, max_group_size)))
    n_validation = n_validation or int(rng.integers(3, 2 * max_group_size))
    groups.extend([NEVER] * n_validation)

    outcomes = rng.normal(-4.0, 1.5, size=(len(groups), n_checkpoints))
    return make_panel(checkpoints, groups, outcomes, treatment_grid=treatment_grid)


# ---------------------------------------------------------------------------
# naive oracles

def naive_group_mean(panel: Panel, g, c) -> float:
    total, count = 0.0, 0
    ci = list(int(x) for x in panel.checkpoints).index(int(c))
    for i in range(len(panel.instance_ids)):
        if panel.groups[i] == g:
            total += float(panel.outcomes[i, ci])
            count += 1
    return total / count


def naive_baseline(panel: Panel, g) -> int:
    earlier = [int(c) for c in panel.checkpoints if c < g]
    return max(earlier)


def naive_diff(panel: Panel, g, c) -> float:
    return naive_group_mean(panel, g, c) - naive_group_mean(panel, NEVER, c)


def naive_did(panel: Panel, g, c) -> float:
    b = naive_baseline(panel, g)
    return (naive_group_mean(panel, g, c) - naive_group_mean(panel, g, b)) - (
        naive_group_mean(panel, NEVER, c) - naive_group_mean(panel, NEVER, b)
    )


def naive_admissible(treatment_grid, checkpoint_grid):
    out = []
    for g in sorted(int(x) for x in treatment_grid):
        for c in sorted(int(x) for x in checkpoint_grid):
            if c >= g:
                out.append((g, c))
    return out


@pytest.fixture
def toy_panel() -> Panel:
    """4 instances x 3 checkpoints, groups {1, 1, 2, inf}."""
    return make_panel(
        checkpoints=[0, 1, 2],
        groups_per_instance=[1, 1, 2, "inf"],
        outcomes=[
            [-5.0, -4.0, -3.5],
            [-6.0, -5.5, -5.0],
            [-4.0, -3.8, -3.0],
            [-5.0, -4.8, -4.6],
        ],
    )
