"""Aggregated views of a memorisation profile and cross-profile comparison.

Three standard summaries: the instantaneous series (diagonal cells, one
per treatment step), the persistent average (cells pooled by event time,
the number of checkpoints elapsed since treatment), and the residual
series (the profile column at a final checkpoint). Averaged series do not
propagate per-cell standard errors, since the dependence between cells is
unknown; use :func:`memprof.inference.aggregate_bands` to attach bands
recomputed from the bootstrap draws of the aggregate itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Union

import numpy as np

from .estimators import MemorisationProfile


class SeriesKind(str, Enum):
    INSTANTANEOUS = "instantaneous"
    PERSISTENT_AVG = "persistent"
    RESIDUAL = "residual"


@dataclass(frozen=True)
class SeriesPoint:
    """One aggregated point; ``index`` is g for instantaneous/residual
    series and event time e = c - g for persistent averages."""

    index: int
    value: float
    se: float | None = None
    significant: bool | None = None
    n_cells: int = 1


@dataclass
class Series:
    kind: SeriesKind
    points: list[SeriesPoint]

    def __post_init__(self) -> None:
        indices = [p.index for p in self.points]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("series indices must be strictly increasing")
        if self.kind is SeriesKind.PERSISTENT_AVG and any(i < 0 for i in indices):
            raise ValueError("event times must be non-negative")

    def values(self) -> np.ndarray:
        return np.asarray([p.value for p in self.points], dtype=np.float64)


def instantaneous(profile: MemorisationProfile) -> Series:
    """Diagonal cells (g, c = g), in treatment-grid order.

    Carries each cell's se and significance when bands have been applied.
    """
    points = [
        SeriesPoint(index=cell.g, value=cell.estimate, se=cell.se,
                    significant=cell.significant)
        for cell in profile.cells
        if cell.c == cell.g
    ]
    return Series(kind=SeriesKind.INSTANTANEOUS, points=points)


def persistent_average(profile: MemorisationProfile) -> Series:
    """Mean estimate at each event time e = c - g, pooled across groups."""
    pools: dict[int, list[float]] = {}
    for cell in profile.cells:
        pools.setdefault(cell.c - cell.g, []).append(cell.estimate)
    points = [
        SeriesPoint(index=e, value=float(np.mean(vals)), n_cells=len(vals))
        for e, vals in sorted(pools.items())
    ]
    return Series(kind=SeriesKind.PERSISTENT_AVG, points=points)


def residual(profile: MemorisationProfile, t: int) -> Series:
    """The profile column at checkpoint ``t``, one point per treatment step.

    ``t`` must not precede any treatment step, so every group has a cell.
    """
    t = int(t)
    steps = profile.treatment_steps
    if t < max(steps):
        raise ValueError(f"residual checkpoint {t} precedes treatment step {max(steps)}")
    if t not in profile.checkpoint_steps:
        raise ValueError(f"checkpoint {t} not covered by this profile")
    points = [
        SeriesPoint(index=cell.g, value=cell.estimate, se=cell.se,
                    significant=cell.significant)
        for cell in profile.cells
        if cell.c == t
    ]
    return Series(kind=SeriesKind.RESIDUAL, points=points)


def profile_correlation(p1: MemorisationProfile, p2: MemorisationProfile,
                        significant_only: bool = False) -> float:
    """Pearson correlation between two profiles over paired cells.

    Both profiles must cover the same (g, c) cells. With
    ``significant_only`` the comparison is restricted to cells marked
    significant in both profiles, which requires bands on both.
    """
    k1, k2 = p1.keys(), p2.keys()
    if k1 != k2:
        raise ValueError("profiles cover different (g, c) cell sets")
    if significant_only:
        keys = [
            key for key in k1
            if p1.cell(*key).significant and p2.cell(*key).significant
        ]
        if len(keys) < 2:
            raise ValueError("fewer than two cells are significant in both profiles")
        a = np.asarray([p1.cell(*key).estimate for key in keys])
        b = np.asarray([p2.cell(*key).estimate for key in keys])
    else:
        a, b = p1.estimates(), p2.estimates()
    a = a - a.mean()
    b = b - b.mean()
    denom = float(np.sqrt((a * a).sum() * (b * b).sum()))
    if denom == 0.0:
        raise ValueError("profile has zero variance across cells")
    return float(np.clip((a * b).sum() / denom, -1.0, 1.0))


# ---------------------------------------------------------------------------
# series CSV interchange: kind,index,value,se,significant,n_cells

SERIES_HEADER = ("kind", "index", "value", "se", "significant", "n_cells")


def write_series_csv(series: Series, sink: Union[str, Path, IO[str]]) -> None:
    own = isinstance(sink, (str, Path))
    stream = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        stream.write(",".join(SERIES_HEADER) + "\n")
        for p in series.points:
            se = "" if p.se is None else repr(float(p.se))
            sig = "" if p.significant is None else ("true" if p.significant else "false")
            stream.write(f"{series.kind.value},{p.index},{float(p.value)!r},{se},{sig},{p.n_cells}\n")
    finally:
        if own:
            stream.close()


def read_series_csv(source: Union[str, Path, IO[str]]) -> Series:
    own = isinstance(source, (str, Path))
    stream = open(source, "r", encoding="utf-8", newline="") if own else source
    try:
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SERIES_HEADER:
            raise ValueError(f"bad series header {header!r}: expected {','.join(SERIES_HEADER)}")
        kind: SeriesKind | None = None
        points: list[SeriesPoint] = []
        for rec in reader:
            if not rec:
                continue
            k, index, value, se, sig, n_cells = rec
            row_kind = SeriesKind(k)
            if kind is None:
                kind = row_kind
            elif row_kind is not kind:
                raise ValueError("mixed series kinds in one file")
            if sig != "" and sig.lower() not in ("true", "false"):
                raise ValueError(f"significant must be true/false/empty, got {sig!r}")
            points.append(SeriesPoint(
                index=int(index), value=float(value),
                se=float(se) if se != "" else None,
                significant=(sig.lower() == "true") if sig != "" else None,
                n_cells=int(n_cells),
            ))
        if kind is None:
            raise ValueError("series file has no points")
        return Series(kind=kind, points=points)
    finally:
        if own:
            stream.close()
