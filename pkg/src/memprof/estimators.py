"""Point estimators of expected counterfactual memorisation.

Two panel estimators are provided. The difference estimator contrasts a
treated group against the validation set at the same checkpoint and is
unbiased when instances are assigned to groups i.i.d. The
difference-in-differences estimator additionally differences each group
against its own pre-treatment anchor, which removes per-instance fixed
effects and any trend that is common to all groups; it is unbiased under
parallel trends and no anticipation.

Two further estimators operate outside the panel: the architectural
estimator contrasts outcome draws from run ensembles trained with and
without an instance, and the extractable estimator takes an observed
extraction outcome at face value under a zero-counterfactual assumption.

A full set of estimates over every admissible ``(g, c)`` pair (checkpoint
at or after treatment) forms a memorisation profile. Cells with ``c < g``
are structurally absent rather than stored as zeros.

All estimates carry treated-group semantics: each cell averages over the
instances actually trained at step ``g`` (an ATT), and nothing here
claims the population-level reading that would additionally require
random assignment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

import numpy as np

from .panel import NEVER, Panel, PanelError, baseline_checkpoint, group_mean


class EstimatorKind(str, Enum):
    DIFF = "diff"
    DID = "did"


@dataclass(frozen=True)
class ProfileCell:
    """One profile entry: the estimate at treatment step ``g``, checkpoint ``c``.

    ``se`` is populated only once inference has been run, and
    ``significant`` only alongside ``se``.
    """

    g: int
    c: int
    estimate: float
    se: float | None = None
    significant: bool | None = None

    def __post_init__(self) -> None:
        if self.c < self.g:
            raise ValueError(f"cell ({self.g}, {self.c}) lies in the structural-zero region c < g")
        if self.se is not None and self.se < 0:
            raise ValueError("se must be non-negative")
        if (self.se is None) != (self.significant is None):
            raise ValueError("se and significant must be set together")


@dataclass
class MemorisationProfile:
    """All admissible cells of a memorisation estimate, ordered by (g, c).

    ``kind`` records which estimator produced the values; it is ``None``
    for truth surfaces and for profiles read back from CSV (the file
    format does not carry it).
    """

    cells: list[ProfileCell]
    kind: EstimatorKind | None = None
    metric_name: str = "outcome"
    _by_key: dict[tuple[int, int], ProfileCell] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("profile has no cells: no (g, c) pair with c >= g exists")
        self.cells = sorted(self.cells, key=lambda cell: (cell.g, cell.c))
        self._by_key = {(cell.g, cell.c): cell for cell in self.cells}
        if len(self._by_key) != len(self.cells):
            raise ValueError("duplicate (g, c) cell in profile")
        self._check_complete()

    def _check_complete(self) -> None:
        # one cell per admissible pair of the grids the cells themselves span
        gs = sorted({cell.g for cell in self.cells})
        cs = sorted({cell.c for cell in self.cells})
        for g in gs:
            for c in cs:
                if c >= g and (g, c) not in self._by_key:
                    raise ValueError(f"profile is missing admissible cell ({g}, {c})")

    @property
    def treatment_steps(self) -> list[int]:
        return sorted({cell.g for cell in self.cells})

    @property
    def checkpoint_steps(self) -> list[int]:
        return sorted({cell.c for cell in self.cells})

    def keys(self) -> list[tuple[int, int]]:
        return [(cell.g, cell.c) for cell in self.cells]

    def cell(self, g: int, c: int) -> ProfileCell:
        try:
            return self._by_key[(int(g), int(c))]
        except KeyError:
            raise KeyError(f"no profile cell at ({g}, {c})") from None

    def estimates(self) -> np.ndarray:
        return np.asarray([cell.estimate for cell in self.cells], dtype=np.float64)

    def has_bands(self) -> bool:
        return all(cell.se is not None for cell in self.cells)

    def with_cells(self, cells: list[ProfileCell]) -> "MemorisationProfile":
        return MemorisationProfile(cells=cells, kind=self.kind, metric_name=self.metric_name)


@dataclass(frozen=True)
class RunEnsemble:
    """Final-checkpoint outcomes from independently trained runs.

    ``with_x`` holds outcomes of runs whose training data included the
    instance; ``without_x`` holds outcomes of runs that excluded it.
    """

    with_x: Sequence[float]
    without_x: Sequence[float]

    def __post_init__(self) -> None:
        if len(self.with_x) == 0 or len(self.without_x) == 0:
            raise ValueError("both run ensembles must be non-empty")


def admissible_cells(treatment_grid: Iterable[int], checkpoint_grid: Iterable[int]) -> list[tuple[int, int]]:
    """All (g, c) pairs with c >= g, in (g, c) order."""
    cps = sorted(int(c) for c in checkpoint_grid)
    return [(int(g), c) for g in sorted(int(g) for g in treatment_grid) for c in cps if c >= g]


def diff_estimate(panel: Panel, g: int, c: int) -> float:
    """Difference estimator: treated group mean minus validation mean at ``c``."""
    if c < g:
        raise ValueError(f"({g}, {c}) lies in the structural-zero region c < g")
    return group_mean(panel, g, c) - group_mean(panel, NEVER, c)


def did_estimate(panel: Panel, g: int, c: int) -> float:
    """Difference-in-differences estimator at ``(g, c)``.

    With ``b`` the pre-treatment anchor of ``g``, this is the change in the
    treated group's mean from ``b`` to ``c`` minus the same change in the
    validation set.
    """
    if c < g:
        raise ValueError(f"({g}, {c}) lies in the structural-zero region c < g")
    b = baseline_checkpoint(panel, g)
    trained = group_mean(panel, g, c) - group_mean(panel, g, b)
    untrained = group_mean(panel, NEVER, c) - group_mean(panel, NEVER, b)
    return trained - untrained


def estimate_profile(panel: Panel, kind: EstimatorKind | str,
                     metric_name: str = "outcome") -> MemorisationProfile:
    """Estimate every admissible cell of the memorisation profile.

    Equivalent to calling the cell estimator at each (g, c) with c >= g,
    but computed from per-group mean curves in one pass.
    """
    kind = EstimatorKind(kind)
    index = panel.group_index
    means: dict[float, np.ndarray] = {}
    for g, rows in index.rows.items():
        if len(rows) == 0:
            raise PanelError(f"group {g} has no instances")
        means[g] = panel.outcomes[rows].mean(axis=0)

    cps = panel.checkpoints
    never = means[NEVER]
    cells: list[ProfileCell] = []
    for g in panel.treatment_grid:
        g = int(g)
        gm = means[g]
        post = np.flatnonzero(cps >= g)
        if kind is EstimatorKind.DIFF:
            vals = gm[post] - never[post]
        else:
            b = panel.column(baseline_checkpoint(panel, g))
            vals = (gm[post] - gm[b]) - (never[post] - never[b])
        cells.extend(
            ProfileCell(g=g, c=int(cps[j]), estimate=float(v))
            for j, v in zip(post, vals)
        )
    return MemorisationProfile(cells=cells, kind=kind, metric_name=metric_name)


def extractable_estimate(outcome: float) -> float:
    """Extractable memorisation: the observed extraction outcome itself.

    Valid for outcomes in [0, 1] (an extractability indicator or rate);
    the untrained counterfactual is assumed to be zero.
    """
    if not (0.0 <= outcome <= 1.0):
        raise ValueError(f"extraction outcome {outcome} outside [0, 1]")
    return float(outcome)


def architectural_estimate(ensemble: RunEnsemble) -> float:
    """Mean outcome gap between runs trained with and without the instance."""
    return float(np.mean(np.asarray(ensemble.with_x, dtype=np.float64))
                 - np.mean(np.asarray(ensemble.without_x, dtype=np.float64)))


# ---------------------------------------------------------------------------
# profile CSV interchange: g,c,estimate,se,significant

PROFILE_HEADER = ("g", "c", "estimate", "se", "significant")


def _fmt_opt(value: float | bool | None) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(float(value))


def write_profile_csv(profile: MemorisationProfile, sink: Union[str, Path, IO[str]]) -> None:
    own = isinstance(sink, (str, Path))
    stream = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        stream.write(",".join(PROFILE_HEADER) + "\n")
        for cell in profile.cells:
            stream.write(
                f"{cell.g},{cell.c},{float(cell.estimate)!r},"
                f"{_fmt_opt(cell.se)},{_fmt_opt(cell.significant)}\n"
            )
    finally:
        if own:
            stream.close()


def read_profile_csv(source: Union[str, Path, IO[str]],
                     kind: EstimatorKind | str | None = None) -> MemorisationProfile:
    own = isinstance(source, (str, Path))
    stream = open(source, "r", encoding="utf-8", newline="") if own else source
    try:
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PROFILE_HEADER:
            raise ValueError(f"bad profile header {header!r}: expected {','.join(PROFILE_HEADER)}")
        cells: list[ProfileCell] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 5:
                raise ValueError(f"line {lineno}: expected 5 fields, got {len(rec)}")
            g, c, est, se, sig = rec
            if sig != "" and sig.lower() not in ("true", "false"):
                raise ValueError(f"line {lineno}: significant must be true/false/empty, got {sig!r}")
            cells.append(ProfileCell(
                g=int(g), c=int(c), estimate=float(est),
                se=float(se) if se != "" else None,
                significant=(sig.lower() == "true") if sig != "" else None,
            ))
        if not cells:
            raise ValueError("profile file has no cells")
        return MemorisationProfile(cells=cells, kind=EstimatorKind(kind) if kind else None)
    finally:
        if own:
            stream.close()
