"""Balanced outcome panels over training checkpoints.

A panel records, for every tracked instance, the model's performance at
every checkpoint of a single training run, together with the treatment
step at which the instance entered training. Held-out validation
instances carry the :data:`NEVER` sentinel, which sorts above every
integer step.

Treatment and checkpoint steps are plain integers; grids are inferred
from the data on load. The interchange format is a long CSV with header
``instance_id,group,checkpoint,outcome``, where ``group`` is a positive
integer step or the literal ``inf`` (case-insensitive).

Panels are treated as immutable once constructed (loading is
single-threaded; everything downstream only reads), so one panel can be
shared freely across worker threads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Union

import numpy as np

#: Sentinel treatment step for instances never used in training.
NEVER: float = math.inf

#: A treatment step: a positive integer, or NEVER.
Group = Union[int, float]

PANEL_HEADER = ("instance_id", "group", "checkpoint", "outcome")


class PanelError(ValueError):
    """A panel violates the balanced-panel data contract."""


def format_group(g: Group) -> str:
    return "inf" if g == NEVER else str(int(g))


def parse_group(text: str) -> Group:
    if text.strip().lower() == "inf":
        return NEVER
    try:
        value = int(text)
    except ValueError:
        raise PanelError(f"invalid group value {text!r}: expected a positive integer or 'inf'") from None
    if value <= 0:
        raise PanelError(f"invalid group value {text!r}: treatment steps are positive")
    return value


@dataclass
class GroupIndex:
    """Row indices and sizes per treatment step, covering all rows exactly once."""

    rows: dict[Group, np.ndarray]
    sizes: dict[Group, int]

    def __post_init__(self) -> None:
        for g, idx in self.rows.items():
            if self.sizes[g] != len(idx):
                raise PanelError(f"group index size mismatch for group {format_group(g)}")


@dataclass
class Panel:
    """A complete grid of observed outcomes.

    Parameters
    ----------
    checkpoints : array-like of int
        Strictly increasing checkpoint steps (length C).
    treatment_grid : array-like of int
        Strictly increasing treatment steps (length K).
    instance_ids : sequence of str
        One unique opaque identifier per row.
    groups : array-like
        Per-row treatment step; integer values must appear in
        ``treatment_grid``, validation rows carry :data:`NEVER`.
    outcomes : array-like, shape (n, C)
        Observed outcome of each instance at each checkpoint, in the units
        of the chosen performance metric. 32-bit input is widened to float64.
    """

    checkpoints: np.ndarray
    treatment_grid: np.ndarray
    instance_ids: tuple[str, ...]
    groups: np.ndarray
    outcomes: np.ndarray
    _column_of: dict[int, int] = field(init=False, repr=False, default_factory=dict)
    _index: GroupIndex | None = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        self.checkpoints = np.asarray(self.checkpoints, dtype=np.int64)
        self.treatment_grid = np.asarray(self.treatment_grid, dtype=np.int64)
        self.instance_ids = tuple(str(x) for x in self.instance_ids)
        self.groups = np.asarray(self.groups, dtype=np.float64)
        self.outcomes = np.ascontiguousarray(self.outcomes, dtype=np.float64)
        self._validate()
        self._column_of = {int(c): i for i, c in enumerate(self.checkpoints)}

    def _validate(self) -> None:
        if self.checkpoints.ndim != 1 or len(self.checkpoints) == 0:
            raise PanelError("checkpoint grid is empty")
        if np.any(self.checkpoints < 0):
            raise PanelError("checkpoint steps must be non-negative")
        if np.any(np.diff(self.checkpoints) <= 0):
            raise PanelError("checkpoint grid must be strictly increasing")
        if self.treatment_grid.ndim != 1 or len(self.treatment_grid) == 0:
            raise PanelError("treatment grid is empty")
        if np.any(self.treatment_grid <= 0):
            raise PanelError("treatment steps must be positive")
        if np.any(np.diff(self.treatment_grid) <= 0):
            raise PanelError("treatment grid must be strictly increasing")

        n = len(self.instance_ids)
        if len(set(self.instance_ids)) != n:
            seen: set[str] = set()
            for x in self.instance_ids:
                if x in seen:
                    raise PanelError(f"duplicate instance_id {x!r}")
                seen.add(x)
        if self.groups.shape != (n,):
            raise PanelError("groups must have one entry per instance")
        if self.outcomes.shape != (n, len(self.checkpoints)):
            raise PanelError(
                f"outcomes shape {self.outcomes.shape} does not match "
                f"{n} instances x {len(self.checkpoints)} checkpoints"
            )
        if not np.all(np.isfinite(self.outcomes)):
            i, j = np.argwhere(~np.isfinite(self.outcomes))[0]
            raise PanelError(
                f"non-finite outcome at ({self.instance_ids[i]}, c={int(self.checkpoints[j])})"
            )

        finite = np.isfinite(self.groups)
        if not np.any(~finite):
            raise PanelError("panel has no validation (NEVER) instances")
        treated = self.groups[finite]
        if len(treated) and not np.all(np.isin(treated.astype(np.int64), self.treatment_grid)):
            bad = treated[~np.isin(treated.astype(np.int64), self.treatment_grid)][0]
            raise PanelError(f"group value {int(bad)} absent from treatment grid")
        # every treatment step needs a pre-treatment anchor in the grid
        for g in self.treatment_grid:
            if not np.any(self.checkpoints < g):
                raise PanelError(f"treatment step {int(g)} has no baseline checkpoint in the grid")

    @property
    def n_instances(self) -> int:
        return len(self.instance_ids)

    @property
    def n_checkpoints(self) -> int:
        return len(self.checkpoints)

    def column(self, c: int) -> int:
        """Column index of checkpoint ``c``; raises if not on the grid."""
        try:
            return self._column_of[int(c)]
        except KeyError:
            raise PanelError(f"checkpoint {c} not in the panel grid") from None

    @property
    def group_index(self) -> GroupIndex:
        """Cached partition of rows by treatment step (built on first use)."""
        if self._index is None:
            order: list[Group] = [int(g) for g in self.treatment_grid] + [NEVER]
            rows = {}
            sizes = {}
            for g in order:
                idx = np.flatnonzero(self.groups == g)
                rows[g] = idx
                sizes[g] = len(idx)
            self._index = GroupIndex(rows=rows, sizes=sizes)
        return self._index

    def rows_of(self, g: Group) -> np.ndarray:
        idx = self.group_index.rows.get(NEVER if g == NEVER else int(g))
        if idx is None or len(idx) == 0:
            raise PanelError(f"group {format_group(g)} has no instances")
        return idx


def group_mean(panel: Panel, g: Group, c: int) -> float:
    """Mean outcome at checkpoint ``c`` over the instances treated at step ``g``.

    ``g`` may be :data:`NEVER` to average the validation set.
    """
    rows = panel.rows_of(g)
    col = panel.column(c)
    return float(panel.outcomes[rows, col].mean())


def baseline_checkpoint(panel: Panel, g: int) -> int:
    """The pre-treatment anchor: the largest grid checkpoint strictly below ``g``."""
    earlier = panel.checkpoints[panel.checkpoints < g]
    if len(earlier) == 0:
        raise PanelError(f"no grid checkpoint precedes treatment step {int(g)}")
    return int(earlier[-1])


def _open_text(source: Union[str, Path, IO[str], IO[bytes]]) -> tuple[IO[str], bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def load_panel(source: Union[str, Path, IO[str], IO[bytes]]) -> Panel:
    """Parse and validate a PanelFile CSV into a balanced :class:`Panel`.

    Rows may arrive in any order; checkpoint and treatment grids are the
    sorted distinct values observed. Raises :class:`PanelError` on any
    contract violation: duplicate or missing cells, conflicting group
    assignments, non-finite outcomes, or a panel without validation rows.
    """
    stream, owned = _open_text(source)
    try:
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None:
            raise PanelError("no records")
        if tuple(h.strip() for h in header) != PANEL_HEADER:
            raise PanelError(
                f"bad header {header!r}: expected {','.join(PANEL_HEADER)}"
            )

        ids: list[str] = []
        id_row: dict[str, int] = {}
        group_of: list[Group] = []
        row_idx: list[int] = []
        cp_vals: list[int] = []
        values: list[float] = []

        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 4:
                raise PanelError(f"line {lineno}: expected 4 fields, got {len(rec)}")
            xid, gtxt, ctxt, ytxt = rec
            try:
                c = int(ctxt)
            except ValueError:
                raise PanelError(f"line {lineno}: invalid checkpoint {ctxt!r}") from None
            if c < 0:
                raise PanelError(f"line {lineno}: negative checkpoint {c}")
            g = parse_group(gtxt)
            try:
                y = float(ytxt)
            except ValueError:
                raise PanelError(f"line {lineno}: invalid outcome {ytxt!r}") from None
            if not math.isfinite(y):
                raise PanelError(f"non-finite outcome at ({xid}, c={c})")

            i = id_row.get(xid)
            if i is None:
                i = len(ids)
                id_row[xid] = i
                ids.append(xid)
                group_of.append(g)
            elif group_of[i] != g:
                raise PanelError(
                    f"instance {xid} assigned to groups {format_group(group_of[i])} and {format_group(g)}"
                )
            row_idx.append(i)
            cp_vals.append(c)
            values.append(y)

        if not ids:
            raise PanelError("no records")

        checkpoints = np.unique(np.asarray(cp_vals, dtype=np.int64))
        col_of = {int(c): j for j, c in enumerate(checkpoints)}
        cols = np.asarray([col_of[c] for c in cp_vals], dtype=np.int64)
        rows = np.asarray(row_idx, dtype=np.int64)
        n, ncols = len(ids), len(checkpoints)

        flat = rows * ncols + cols
        order = np.argsort(flat, kind="stable")
        dup = np.flatnonzero(np.diff(flat[order]) == 0)
        if len(dup):
            k = order[dup[0]]
            raise PanelError(
                f"duplicate cell ({ids[int(rows[k])]}, c={int(checkpoints[cols[k]])})"
            )
        if len(flat) < n * ncols:
            present = np.zeros(n * ncols, dtype=bool)
            present[flat] = True
            k = int(np.flatnonzero(~present)[0])
            raise PanelError(f"unbalanced panel at ({ids[k // ncols]}, c={int(checkpoints[k % ncols])})")

        outcomes = np.empty((n, ncols), dtype=np.float64)
        outcomes[rows, cols] = np.asarray(values, dtype=np.float64)

        groups = np.asarray([float(g) for g in group_of], dtype=np.float64)
        treatment_grid = np.unique(groups[np.isfinite(groups)]).astype(np.int64)
        if len(treatment_grid) == 0:
            raise PanelError("panel has no treated instances")
        return Panel(
            checkpoints=checkpoints,
            treatment_grid=treatment_grid,
            instance_ids=tuple(ids),
            groups=groups,
            outcomes=outcomes,
        )
    finally:
        if owned:
            stream.close()


def save_panel(panel: Panel, sink: Union[str, Path, IO[str]]) -> None:
    """Write a PanelFile CSV that round-trips the outcome matrix bit-exactly.

    Outcomes are rendered with Python's shortest round-trip float
    formatting; rows are emitted instance-major in panel order. Instance
    ids are opaque strings and are CSV-quoted when they need it.
    """
    own = isinstance(sink, (str, Path))
    stream = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(PANEL_HEADER)
        steps = [int(c) for c in panel.checkpoints]
        for i, xid in enumerate(panel.instance_ids):
            gtxt = format_group(panel.groups[i])
            row = panel.outcomes[i]
            for j, c in enumerate(steps):
                writer.writerow((xid, gtxt, c, repr(float(row[j]))))
    finally:
        if own:
            stream.close()
