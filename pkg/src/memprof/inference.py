"""Simultaneous confidence bands via the simple multiplier bootstrap.

Each profile cell admits a linear (influence) representation: one number
per panel instance whose average over the sample tracks the estimator's
sampling fluctuation. The bootstrap perturbs these influence values with
i.i.d. mean-zero unit-variance multiplier weights, shared across all
cells within a draw, which preserves the dependence between cells. A
robust per-cell standard error comes from the interquartile range of the
perturbed draws, and one sup-t critical value, the empirical quantile of
the largest studentised perturbation across cells, yields bands that
cover the whole profile simultaneously.

Weights are generated on counter-based substreams keyed by
``(seed, draw index)`` (see :mod:`memprof._rng`), so draws can be batched
or parallelised without changing any output bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence, Union

import numpy as np
from scipy.stats import norm

from ._rng import RNG_NAME, WeightFamily, multiplier_weights
from .estimators import EstimatorKind, MemorisationProfile, ProfileCell
from .panel import NEVER, Panel, baseline_checkpoint

#: Cells whose bootstrap se falls below this are treated as degenerate:
#: excluded from the sup statistic and never marked significant.
SE_FLOOR = 1e-12

#: Width of the (0.25, 0.75) interquartile range of a standard normal.
_Z_IQR = float(norm.ppf(0.75) - norm.ppf(0.25))


def influence_values(panel: Panel, g: int, c: int,
                     kind: EstimatorKind | str = EstimatorKind.DID) -> np.ndarray:
    """Per-instance influence contributions for the estimate at ``(g, c)``.

    For the DiD estimator, with ``b`` the pre-treatment anchor of ``g`` and
    ``dY = Y_c - Y_b``: instances in group ``g`` contribute
    ``(n / n_g) * (dY - mean_g dY)``, validation instances contribute
    ``-(n / n_inf) * (dY - mean_inf dY)``, and all other instances
    contribute zero. For the difference estimator the same construction
    applies to outcome levels at ``c`` instead of differences. Columns are
    mean-zero by construction.
    """
    kind = EstimatorKind(kind)
    if c < g:
        raise ValueError(f"({g}, {c}) lies in the structural-zero region c < g")
    rows_g = panel.rows_of(g)
    rows_v = panel.rows_of(NEVER)
    col = panel.column(c)
    n = panel.n_instances

    if kind is EstimatorKind.DID:
        b = panel.column(baseline_checkpoint(panel, g))
        vg = panel.outcomes[rows_g, col] - panel.outcomes[rows_g, b]
        vv = panel.outcomes[rows_v, col] - panel.outcomes[rows_v, b]
    else:
        vg = panel.outcomes[rows_g, col]
        vv = panel.outcomes[rows_v, col]

    psi = np.zeros(n, dtype=np.float64)
    psi[rows_g] = (n / len(rows_g)) * (vg - vg.mean())
    psi[rows_v] = -(n / len(rows_v)) * (vv - vv.mean())
    return psi


@dataclass
class InfluenceMatrix:
    """Influence values for every admissible cell, one column per cell."""

    cells: list[tuple[int, int]]
    values: np.ndarray  # (n_instances, n_cells)

    def column(self, g: int, c: int) -> np.ndarray:
        return self.values[:, self.cells.index((g, c))]


def influence_matrix(panel: Panel, profile: MemorisationProfile) -> InfluenceMatrix:
    """Materialise the full influence matrix of a profile.

    Memory grows as instances x cells; the bootstrap itself never builds
    this and large panels should not either.
    """
    kind = _require_kind(profile)
    cells = profile.keys()
    values = np.empty((panel.n_instances, len(cells)), dtype=np.float64)
    for j, (g, c) in enumerate(cells):
        values[:, j] = influence_values(panel, g, c, kind)
    return InfluenceMatrix(cells=cells, values=values)


@dataclass
class ConfidenceBands:
    """Per-cell standard errors plus one simultaneous sup-t critical value.

    Identical inputs (panel, profile, draws, alpha, weight family, seed)
    reproduce identical bands bitwise.
    """

    alpha: float
    boot_draws: int
    seed: int
    weight_family: WeightFamily
    crit: float
    se: dict[tuple[int, int], float]
    simultaneous: bool = True
    se_method: str = "iqr"
    rng_name: str = RNG_NAME

    def cells(self) -> list[tuple[int, int]]:
        return sorted(self.se)


def _require_kind(profile: MemorisationProfile) -> EstimatorKind:
    if profile.kind is None:
        raise ValueError("profile does not record its estimator kind; pass one explicitly")
    return profile.kind


def _group_centered_outcomes(panel: Panel) -> np.ndarray:
    centered = panel.outcomes.copy()
    for rows in panel.group_index.rows.values():
        if len(rows):
            centered[rows] -= centered[rows].mean(axis=0)
    return centered


def _bootstrap_array(panel: Panel, cells: Sequence[tuple[int, int]], kind: EstimatorKind,
                     boot_draws: int, seed: int, weight_family: WeightFamily,
                     chunk_draws: int = 256) -> np.ndarray:
    """Bootstrap perturbations R*[draw, cell] = (1/n) sum_x V_x psi_cell(x).

    Computed group-by-group from group-centered outcomes, which is
    algebraically identical to the influence-matrix product but touches
    each instance row once per draw chunk.
    """
    n = panel.n_instances
    centered = _group_centered_outcomes(panel)
    rows_v = panel.rows_of(NEVER)
    n_v = len(rows_v)

    by_group: dict[int, list[int]] = {}
    for j, (g, _) in enumerate(cells):
        by_group.setdefault(g, []).append(j)
    col_of_cell = np.asarray([panel.column(c) for _, c in cells], dtype=np.intp)
    base_col = {g: panel.column(baseline_checkpoint(panel, g)) for g in by_group}

    out = np.empty((boot_draws, len(cells)), dtype=np.float64)
    for start in range(0, boot_draws, chunk_draws):
        stop = min(start + chunk_draws, boot_draws)
        weights = multiplier_weights(seed, start, stop - start, n, weight_family)
        s_v = weights[:, rows_v] @ centered[rows_v]
        for g, cell_idx in by_group.items():
            rows_g = panel.rows_of(g)
            s_g = weights[:, rows_g] @ centered[rows_g]
            cols = col_of_cell[cell_idx]
            if kind is EstimatorKind.DID:
                b = base_col[g]
                block = ((s_g[:, cols] - s_g[:, [b]]) / len(rows_g)
                         - (s_v[:, cols] - s_v[:, [b]]) / n_v)
            else:
                block = s_g[:, cols] / len(rows_g) - s_v[:, cols] / n_v
            out[start:stop, cell_idx] = block
    return out


def multiplier_bootstrap(panel: Panel, profile: MemorisationProfile, boot_draws: int,
                         alpha: float, seed: int,
                         weight_family: WeightFamily | str = WeightFamily.RADEMACHER,
                         se_method: str = "iqr", simultaneous: bool = True,
                         chunk_draws: int = 256) -> ConfidenceBands:
    """Simultaneous confidence bands for a profile estimated on this panel.

    Parameters
    ----------
    panel : Panel
        The panel the profile was estimated from.
    profile : MemorisationProfile
        Must record its estimator kind (DID is the primary use; DIFF
        profiles use level rather than differenced residuals).
    boot_draws : int
        Number of multiplier draws B (at least 200, and B * alpha >= 5 so
        the critical-value quantile is supported).
    alpha : float
        Simultaneous non-coverage level in (0, 1).
    seed : int
        Stream key; identical seeds reproduce bands bitwise.
    weight_family : WeightFamily
        Rademacher by default; Mammen two-point weights as an option.
    se_method : {"iqr", "sd"}
        Robust interquartile-range standard errors (default) or the plain
        bootstrap standard deviation (diagnostics).
    simultaneous : bool
        If False, skip the sup statistic and use the pointwise normal
        critical value instead.
    """
    kind = _require_kind(profile)
    weight_family = WeightFamily(weight_family)
    if boot_draws < 200:
        raise ValueError(f"boot_draws must be at least 200, got {boot_draws}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if boot_draws * alpha < 5:
        raise ValueError(
            f"boot_draws={boot_draws} is too small for alpha={alpha}: need boot_draws * alpha >= 5"
        )
    if se_method not in ("iqr", "sd"):
        raise ValueError(f"se_method must be 'iqr' or 'sd', got {se_method!r}")

    cells = profile.keys()
    draws = _bootstrap_array(panel, cells, kind, boot_draws, seed, weight_family, chunk_draws)

    if se_method == "iqr":
        q25, q75 = np.quantile(draws, [0.25, 0.75], axis=0)
        se = (q75 - q25) / _Z_IQR
    else:
        se = draws.std(axis=0, ddof=1)

    usable = se > SE_FLOOR
    if not np.any(usable):
        raise ValueError("degenerate: no sampling variation in any profile cell")

    if simultaneous:
        sup = np.max(np.abs(draws[:, usable]) / se[usable], axis=1)
        crit = float(np.quantile(sup, 1.0 - alpha))
    else:
        crit = float(norm.ppf(1.0 - alpha / 2.0))

    return ConfidenceBands(
        alpha=float(alpha),
        boot_draws=int(boot_draws),
        seed=int(seed),
        weight_family=weight_family,
        crit=crit,
        se={key: float(s) for key, s in zip(cells, se)},
        simultaneous=simultaneous,
        se_method=se_method,
    )


def apply_bands(profile: MemorisationProfile, bands: ConfidenceBands) -> MemorisationProfile:
    """Populate se and significance flags; estimates are unchanged.

    A cell is significant when ``|estimate| > crit * se``; degenerate
    cells (se at or below the floor) are never significant.
    """
    if set(bands.se) != set(profile.keys()):
        raise ValueError("bands were computed for a different cell set than this profile")
    cells = []
    for cell in profile.cells:
        se = bands.se[(cell.g, cell.c)]
        significant = bool(se > SE_FLOOR and abs(cell.estimate) > bands.crit * se)
        cells.append(ProfileCell(g=cell.g, c=cell.c, estimate=cell.estimate,
                                 se=se, significant=significant))
    return profile.with_cells(cells)


def aggregate_bands(panel: Panel, profile: MemorisationProfile,
                    cell_groups: Sequence[Sequence[tuple[int, int]]],
                    boot_draws: int, alpha: float, seed: int,
                    weight_family: WeightFamily | str = WeightFamily.RADEMACHER,
                    se_method: str = "iqr") -> tuple[np.ndarray, float]:
    """Bands for linear aggregates of profile cells (e.g. event-time means).

    Each entry of ``cell_groups`` is averaged within every bootstrap draw,
    so the aggregate inherits the cross-cell dependence instead of relying
    on any independence assumption. Returns per-aggregate standard errors
    and the sup-t critical value across aggregates.
    """
    kind = _require_kind(profile)
    weight_family = WeightFamily(weight_family)
    cells = profile.keys()
    pos = {key: j for j, key in enumerate(cells)}
    draws = _bootstrap_array(panel, cells, kind, boot_draws, seed, weight_family)

    agg = np.empty((boot_draws, len(cell_groups)), dtype=np.float64)
    for k, members in enumerate(cell_groups):
        idx = [pos[key] for key in members]
        agg[:, k] = draws[:, idx].mean(axis=1)

    if se_method == "iqr":
        q25, q75 = np.quantile(agg, [0.25, 0.75], axis=0)
        se = (q75 - q25) / _Z_IQR
    else:
        se = agg.std(axis=0, ddof=1)

    usable = se > SE_FLOOR
    if not np.any(usable):
        raise ValueError("degenerate: no sampling variation in any aggregate")
    sup = np.max(np.abs(agg[:, usable]) / se[usable], axis=1)
    crit = float(np.quantile(sup, 1.0 - alpha))
    return se, crit


# ---------------------------------------------------------------------------
# bands JSON interchange

def bands_to_json(bands: ConfidenceBands) -> str:
    payload = {
        "alpha": bands.alpha,
        "B": bands.boot_draws,
        "seed": bands.seed,
        "weight_family": bands.weight_family.value,
        "rng": bands.rng_name,
        "se_method": bands.se_method,
        "simultaneous": bands.simultaneous,
        "crit": bands.crit,
        "cells": [
            {"g": g, "c": c, "se": bands.se[(g, c)]} for g, c in sorted(bands.se)
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def write_bands_json(bands: ConfidenceBands, sink: Union[str, Path, IO[str]]) -> None:
    text = bands_to_json(bands)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def read_bands_json(source: Union[str, Path, IO[str]]) -> ConfidenceBands:
    if isinstance(source, (str, Path)):
        payload = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        payload = json.load(source)
    return ConfidenceBands(
        alpha=float(payload["alpha"]),
        boot_draws=int(payload["B"]),
        seed=int(payload["seed"]),
        weight_family=WeightFamily(payload["weight_family"]),
        crit=float(payload["crit"]),
        se={(int(cell["g"]), int(cell["c"])): float(cell["se"]) for cell in payload["cells"]},
        simultaneous=bool(payload.get("simultaneous", True)),
        se_method=str(payload.get("se_method", "iqr")),
        rng_name=str(payload.get("rng", RNG_NAME)),
    )
