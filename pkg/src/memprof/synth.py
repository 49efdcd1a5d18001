"""Synthetic potential-outcomes generator and Monte Carlo harness.

The generator produces balanced panels whose ground truth is known by
construction, with independent toggles for each identification
assumption:

* ``validation_shift`` offsets validation outcomes by a constant,
  breaking i.i.d. group assignment while leaving trends parallel;
* ``trend_gap`` gives trained groups an extra slope per unit time,
  breaking parallel trends;
* ``anticipation`` leaks the treatment effect into the ``k`` checkpoints
  immediately before treatment, breaking no-anticipation.

Outcomes are Gaussian: a per-instance fixed effect (sd ``instance_sd``)
plus i.i.d. observation noise (sd ``noise_sd``), which induces a known
correlation ``rho = instance_sd**2 / (instance_sd**2 + noise_sd**2)``
between an instance's outcomes at any two checkpoints. This makes the
classical variance predictions checkable: with sigma2 the total outcome
variance and group sizes ``n_g`` (treated) and ``n_v`` (validation),

* ``Var(diff) = sigma2 / n_g + sigma2 / n_v``
* ``Var(did)  = 2 sigma2 (1 - rho) / n_g + 2 sigma2 (1 - rho) / n_v``

The DiD variance is sometimes quoted with the treated group size in both
denominators; the two groups enter the derivation symmetrically, so the
second term must scale with the validation size, and the Monte Carlo
suite confirms this form empirically. Trend and effect surfaces come
from small named parametric families so configurations can live in JSON
files.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from ._rng import WeightFamily, derive_seed, generator
from .estimators import (EstimatorKind, MemorisationProfile, ProfileCell,
                         admissible_cells, estimate_profile)
from .inference import multiplier_bootstrap
from .panel import NEVER, Panel


# ---------------------------------------------------------------------------
# named parametric families for trends and effect surfaces

@dataclass(frozen=True)
class ConstantTrend:
    value: float = 0.0

    def at(self, c: float) -> float:
        return self.value


@dataclass(frozen=True)
class LinearTrend:
    slope: float
    intercept: float = 0.0

    def at(self, c: float) -> float:
        return self.intercept + self.slope * c


@dataclass(frozen=True)
class ExpDecayTrend:
    peak: float
    span: float

    def at(self, c: float) -> float:
        return self.peak * math.exp(-c / self.span)


@dataclass(frozen=True)
class ConstantEffect:
    value: float

    def at(self, g: float, c: float) -> float:
        return self.value


@dataclass(frozen=True)
class LinearEffect:
    base: float
    slope: float = 0.0

    def at(self, g: float, c: float) -> float:
        return self.base + self.slope * (c - g)


@dataclass(frozen=True)
class ExpDecayEffect:
    """peak * exp(-(c - g) / span): strongest at treatment, decaying after."""

    peak: float
    span: float

    def at(self, g: float, c: float) -> float:
        return self.peak * math.exp(-(c - g) / self.span)


_TREND_FAMILIES = {"constant": ConstantTrend, "linear": LinearTrend,
                   "exponential-decay": ExpDecayTrend}
_EFFECT_FAMILIES = {"constant": ConstantEffect, "linear": LinearEffect,
                    "exponential-decay": ExpDecayEffect}
_FAMILY_NAMES = {ConstantTrend: "constant", LinearTrend: "linear", ExpDecayTrend: "exponential-decay",
                 ConstantEffect: "constant", LinearEffect: "linear", ExpDecayEffect: "exponential-decay"}


def _family_to_json(obj: Any) -> dict[str, Any]:
    name = _FAMILY_NAMES.get(type(obj))
    if name is None:
        raise ValueError(
            f"{type(obj).__name__} is not a named family; only named families serialise to JSON"
        )
    payload = {"family": name}
    payload.update({k: v for k, v in obj.__dict__.items()})
    return payload


def _family_from_json(payload: dict[str, Any], families: dict[str, type]) -> Any:
    kwargs = dict(payload)
    name = kwargs.pop("family", None)
    cls = families.get(name)
    if cls is None:
        raise ValueError(f"unknown family {name!r}; expected one of {sorted(families)}")
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# configuration and ground truth

@dataclass(frozen=True)
class SynthConfig:
    """Data-generating regime; see the module docstring for the toggles."""

    n_per_group: int
    n_validation: int
    treatment_grid: tuple[int, ...]
    checkpoint_grid: tuple[int, ...]
    effect: Any
    trend: Any = ConstantTrend(0.0)
    trend_gap: float = 0.0
    instance_sd: float = 0.0
    noise_sd: float = 0.0
    anticipation: int = 0
    validation_shift: float = 0.0
    effect_heterogeneity_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_per_group <= 0 or self.n_validation <= 0:
            raise ValueError("group sizes must be positive")
        tg = tuple(int(g) for g in self.treatment_grid)
        cg = tuple(int(c) for c in self.checkpoint_grid)
        if not tg or any(b <= a for a, b in zip(tg, tg[1:])) or tg[0] <= 0:
            raise ValueError("treatment grid must be strictly increasing positive integers")
        if not cg or any(b <= a for a, b in zip(cg, cg[1:])) or cg[0] < 0:
            raise ValueError("checkpoint grid must be strictly increasing and non-negative")
        if min(tg) <= min(cg):
            raise ValueError("every treatment step needs an earlier baseline checkpoint")
        object.__setattr__(self, "treatment_grid", tg)
        object.__setattr__(self, "checkpoint_grid", cg)
        if self.instance_sd < 0 or self.noise_sd < 0 or self.effect_heterogeneity_sd < 0:
            raise ValueError("standard deviations must be non-negative")
        if self.noise_sd == 0 and self.instance_sd > 0:
            raise ValueError(
                "noise_sd = 0 with instance_sd > 0 implies perfectly correlated outcomes (rho = 1)"
            )
        if self.anticipation < 0:
            raise ValueError("anticipation must be a non-negative integer")

    @property
    def rho(self) -> float:
        """Induced correlation between one instance's outcomes at two checkpoints."""
        total = self.instance_sd**2 + self.noise_sd**2
        return 0.0 if total == 0 else self.instance_sd**2 / total

    @property
    def outcome_variance(self) -> float:
        return self.instance_sd**2 + self.noise_sd**2

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "n_per_group": self.n_per_group,
            "n_validation": self.n_validation,
            "treatment_grid": list(self.treatment_grid),
            "checkpoint_grid": list(self.checkpoint_grid),
            "effect": _family_to_json(self.effect),
            "trend": _family_to_json(self.trend),
            "trend_gap": self.trend_gap,
            "instance_sd": self.instance_sd,
            "noise_sd": self.noise_sd,
            "anticipation": self.anticipation,
            "validation_shift": self.validation_shift,
            "effect_heterogeneity_sd": self.effect_heterogeneity_sd,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, payload: dict[str, Any]) -> "SynthConfig":
        data = dict(payload)
        data["treatment_grid"] = tuple(data["treatment_grid"])
        data["checkpoint_grid"] = tuple(data["checkpoint_grid"])
        data["effect"] = _family_from_json(data["effect"], _EFFECT_FAMILIES)
        data["trend"] = _family_from_json(data["trend"], _TREND_FAMILIES)
        return cls(**data)


@dataclass
class SynthTruth:
    """The exact profile the generator's parameters imply, plus regime flags."""

    profile: MemorisationProfile
    iid_holds: bool
    parallel_trends_holds: bool
    no_anticipation_holds: bool

    def estimates(self) -> np.ndarray:
        return self.profile.estimates()


def _leak_columns(checkpoints: np.ndarray, g: int, k: int) -> np.ndarray:
    pre = np.flatnonzero(checkpoints < g)
    return pre[len(pre) - min(k, len(pre)):]


def generate_panel(config: SynthConfig) -> tuple[Panel, SynthTruth]:
    """Draw one balanced panel and the ground truth it embodies.

    Outcomes are ``trend(c) + trend_gap * c * [treated] + alpha_x
    + (effect(g, c) + eta_x) * [applied] + shift * [validation] + eps``,
    where the effect applies at checkpoints at or after treatment plus the
    ``anticipation`` grid checkpoints immediately before it. Deterministic
    given the seed; replications should use derived seeds.
    """
    cps = np.asarray(config.checkpoint_grid, dtype=np.int64)
    n_treated = config.n_per_group * len(config.treatment_grid)
    n = n_treated + config.n_validation

    rng = generator(config.seed, 0)
    alpha = rng.normal(0.0, config.instance_sd, n)
    eta = rng.normal(0.0, config.effect_heterogeneity_sd, n)
    eps = rng.normal(0.0, config.noise_sd, (n, len(cps)))

    trend_vec = np.asarray([config.trend.at(float(c)) for c in cps], dtype=np.float64)
    outcomes = trend_vec[None, :] + alpha[:, None] + eps

    ids: list[str] = []
    groups = np.empty(n, dtype=np.float64)
    row = 0
    for g in config.treatment_grid:
        rows = slice(row, row + config.n_per_group)
        ids.extend(f"g{g}-{k:04d}" for k in range(config.n_per_group))
        groups[rows] = g
        outcomes[rows] += config.trend_gap * cps[None, :]
        applied = np.flatnonzero(cps >= g)
        leaked = _leak_columns(cps, g, config.anticipation)
        for col in np.concatenate([leaked, applied]):
            outcomes[rows, col] += config.effect.at(g, float(cps[col])) + eta[rows]
        row += config.n_per_group
    ids.extend(f"val-{k:04d}" for k in range(config.n_validation))
    groups[row:] = NEVER
    outcomes[row:] += config.validation_shift

    panel = Panel(
        checkpoints=cps,
        treatment_grid=np.asarray(config.treatment_grid, dtype=np.int64),
        instance_ids=tuple(ids),
        groups=groups,
        outcomes=outcomes,
    )
    truth_cells = [
        ProfileCell(g=g, c=c, estimate=float(config.effect.at(g, float(c))))
        for g, c in admissible_cells(config.treatment_grid, config.checkpoint_grid)
    ]
    truth = SynthTruth(
        profile=MemorisationProfile(cells=truth_cells, kind=None, metric_name="synthetic"),
        iid_holds=(config.validation_shift == 0.0 and config.trend_gap == 0.0),
        parallel_trends_holds=(config.trend_gap == 0.0),
        no_anticipation_holds=(config.anticipation == 0),
    )
    return panel, truth


# ---------------------------------------------------------------------------
# Monte Carlo harness

def resolve_workers(requested: int | None = None) -> int:
    """Worker count for replication-level parallelism.

    Explicit argument wins; otherwise the MEMPROF_THREADS environment
    variable; otherwise 1. Results are identical regardless of the count.
    """
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("MEMPROF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


@dataclass
class MonteCarloReport:
    """Per-cell sampling diagnostics of an estimator over R replications."""

    kind: EstimatorKind
    replications: int
    cells: list[tuple[int, int]]
    truth: np.ndarray
    mean_estimate: np.ndarray
    empirical_var: np.ndarray
    predicted_var: np.ndarray
    coverage: float | None = None
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.replications < 2:
            raise ValueError("a Monte Carlo report needs at least 2 replications")
        if self.coverage is not None and not (0.0 <= self.coverage <= 1.0):
            raise ValueError("coverage must lie in [0, 1]")

    @property
    def bias(self) -> np.ndarray:
        return self.mean_estimate - self.truth

    @property
    def mc_se(self) -> np.ndarray:
        """Monte Carlo standard error of each cell's mean estimate."""
        return np.sqrt(self.empirical_var / self.replications)

    def max_bias_ratio(self) -> float:
        """max over cells of |bias| / mc_se; ~N(0,1)-sized when unbiased."""
        return float(np.max(np.abs(self.bias) / self.mc_se))

    def to_json_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "estimator": self.kind.value,
            "replications": self.replications,
            "max_bias_ratio": self.max_bias_ratio(),
            "cells": [
                {
                    "g": g, "c": c,
                    "truth": float(self.truth[j]),
                    "mean_estimate": float(self.mean_estimate[j]),
                    "bias": float(self.bias[j]),
                    "mc_se": float(self.mc_se[j]),
                    "empirical_var": float(self.empirical_var[j]),
                    "predicted_var": float(self.predicted_var[j]),
                }
                for j, (g, c) in enumerate(self.cells)
            ],
        }
        if self.coverage is not None:
            payload["coverage"] = self.coverage
            payload["alpha"] = self.alpha
        return payload

    def summary(self) -> str:
        lines = [
            f"Monte Carlo: {self.kind.value} estimator, {self.replications} replications",
            f"{'g':>6} {'c':>6} {'truth':>10} {'bias':>10} {'|bias|/mcse':>12} "
            f"{'emp var':>10} {'pred var':>10}",
        ]
        for j, (g, c) in enumerate(self.cells):
            ratio = abs(self.bias[j]) / self.mc_se[j]
            lines.append(
                f"{g:>6} {c:>6} {self.truth[j]:>10.4f} {self.bias[j]:>10.5f} {ratio:>12.2f} "
                f"{self.empirical_var[j]:>10.6f} {self.predicted_var[j]:>10.6f}"
            )
        verdict = "unbiased" if self.max_bias_ratio() < 4.0 else "BIASED"
        lines.append(f"max |bias|/mcse = {self.max_bias_ratio():.2f} -> {verdict} at the 4-mcse bar")
        if self.coverage is not None:
            lines.append(f"simultaneous coverage: {self.coverage:.3f} (target {1 - self.alpha:.3f})")
        return "\n".join(lines)


def predicted_variance(config: SynthConfig, kind: EstimatorKind) -> float:
    """Classical sampling variance of one cell under this config.

    Valid for homogeneous effects (zero heterogeneity sd); every cell has
    the same predicted variance because group sizes and the noise model
    are constant across cells.
    """
    sigma2 = config.outcome_variance
    n_g, n_v = config.n_per_group, config.n_validation
    if kind is EstimatorKind.DIFF:
        return sigma2 / n_g + sigma2 / n_v
    return 2.0 * sigma2 * (1.0 - config.rho) / n_g + 2.0 * sigma2 * (1.0 - config.rho) / n_v


def monte_carlo(config: SynthConfig, kind: EstimatorKind | str, replications: int,
                with_bands: bool = False, alpha: float = 0.05, boot_draws: int = 1000,
                weight_family: WeightFamily | str = WeightFamily.RADEMACHER,
                workers: int | None = None) -> MonteCarloReport:
    """Run generate -> estimate (-> bands) cycles on derived seeds.

    Reports per-cell bias against the generator's truth, the empirical
    variance of the estimates, the classical predicted variance, and
    (with bands) the fraction of replications whose simultaneous band
    covered the entire true surface.
    """
    kind = EstimatorKind(kind)
    if replications < 100:
        raise ValueError(f"need at least 100 replications, got {replications}")
    if with_bands and config.noise_sd == 0.0:
        raise ValueError("bands on a noiseless generator are degenerate; set noise_sd > 0")

    cells = admissible_cells(config.treatment_grid, config.checkpoint_grid)
    truth_vec = np.asarray([config.effect.at(g, float(c)) for g, c in cells], dtype=np.float64)

    def one(r: int) -> tuple[np.ndarray, bool | None]:
        cfg = replace(config, seed=derive_seed(config.seed, r, 0))
        panel, _ = generate_panel(cfg)
        profile = estimate_profile(panel, kind, metric_name="synthetic")
        est = profile.estimates()
        covered: bool | None = None
        if with_bands:
            bands = multiplier_bootstrap(panel, profile, boot_draws, alpha,
                                         seed=derive_seed(config.seed, r, 1),
                                         weight_family=weight_family)
            se = np.asarray([bands.se[key] for key in cells])
            covered = bool(np.all(np.abs(est - truth_vec) <= bands.crit * se))
        return est, covered

    n_workers = resolve_workers(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one, range(replications)))
    else:
        results = [one(r) for r in range(replications)]

    estimates = np.stack([est for est, _ in results])
    coverage = None
    if with_bands:
        coverage = float(np.mean([cov for _, cov in results]))

    return MonteCarloReport(
        kind=kind,
        replications=replications,
        cells=cells,
        truth=truth_vec,
        mean_estimate=estimates.mean(axis=0),
        empirical_var=estimates.var(axis=0, ddof=1),
        predicted_var=np.full(len(cells), predicted_variance(config, kind)),
        coverage=coverage,
        alpha=alpha if with_bands else None,
    )


# ---------------------------------------------------------------------------
# canonical assumption regimes

@dataclass(frozen=True)
class RegimeExpectation:
    """Expected estimator behaviour, with closed-form bias surfaces."""

    diff_unbiased: bool
    did_unbiased: bool
    diff_bias: Callable[[int, int], float]
    did_bias: Callable[[int, int], float]


@dataclass(frozen=True)
class Regime:
    name: str
    description: str
    config: SynthConfig
    expect: RegimeExpectation


def _zero_bias(g: int, c: int) -> float:
    return 0.0


def regime_suite(n_per_group: int = 40, n_validation: int = 80, seed: int = 90210) -> list[Regime]:
    """The four canonical regimes used to exercise the identification assumptions.

    (a) all assumptions hold; (b) validation shifted (i.i.d. broken,
    parallel trends intact); (c) trained groups trend faster (parallel
    trends broken); (d) one checkpoint of anticipation. Expected biases
    are exact closed forms under the bundled constant-effect surface.
    """
    base = SynthConfig(
        n_per_group=n_per_group,
        n_validation=n_validation,
        treatment_grid=(2, 4, 6),
        checkpoint_grid=tuple(range(8)),
        effect=ConstantEffect(0.3),
        trend=LinearTrend(slope=0.05),
        instance_sd=0.8,
        noise_sd=0.5,
        seed=seed,
    )
    checkpoints = np.asarray(base.checkpoint_grid)

    def baseline_of(g: int) -> int:
        return int(checkpoints[checkpoints < g][-1])

    shift = 0.2
    gap = 0.02
    tau = base.effect.value

    return [
        Regime(
            name="a",
            description="i.i.d. assignment, parallel trends, and no anticipation all hold",
            config=base,
            expect=RegimeExpectation(True, True, _zero_bias, _zero_bias),
        ),
        Regime(
            name="b",
            description="validation outcomes shifted by a constant: i.i.d. broken, parallel trends intact",
            config=replace(base, validation_shift=shift, seed=derive_seed(seed, 1)),
            expect=RegimeExpectation(
                False, True,
                diff_bias=lambda g, c: -shift,
                did_bias=_zero_bias,
            ),
        ),
        Regime(
            name="c",
            description="trained groups trend faster per unit time: parallel trends broken",
            config=replace(base, trend_gap=gap, seed=derive_seed(seed, 2)),
            expect=RegimeExpectation(
                False, False,
                diff_bias=lambda g, c: gap * c,
                did_bias=lambda g, c: gap * (c - baseline_of(g)),
            ),
        ),
        Regime(
            name="d",
            description="effect leaks one checkpoint before treatment: no-anticipation broken",
            config=replace(base, anticipation=1, seed=derive_seed(seed, 3)),
            expect=RegimeExpectation(
                True, False,
                diff_bias=_zero_bias,
                did_bias=lambda g, c: -tau,
            ),
        ),
    ]
