import io
import math

import numpy as np
import pytest

from memprof.estimators import EstimatorKind, MemorisationProfile, ProfileCell, estimate_profile
from memprof.inference import apply_bands, multiplier_bootstrap
from memprof.synth import (ConstantEffect, ExpDecayEffect, LinearTrend,
                           SynthConfig, generate_panel)
from memprof.views import (SeriesKind, instantaneous, persistent_average,
                           profile_correlation, read_series_csv, residual,
                           write_series_csv)

from conftest import random_panel


def profile_from(values: dict[tuple[int, int], float], with_flags=False) -> MemorisationProfile:
    cells = []
    for (g, c), v in values.items():
        if with_flags:
            cells.append(ProfileCell(g, c, v, se=0.1, significant=abs(v) > 0.2))
        else:
            cells.append(ProfileCell(g, c, v))
    return MemorisationProfile(cells=cells)


def grid_profile(gs, cs, fn, **kw) -> MemorisationProfile:
    return profile_from({(g, c): fn(g, c) for g in gs for c in cs if c >= g}, **kw)


class TestInstantaneous:
    def test_length_matches_treatment_steps(self):
        p = grid_profile([1, 2, 3], [0, 1, 2, 3], lambda g, c: 0.1 * g)
        s = instantaneous(p)
        assert s.kind is SeriesKind.INSTANTANEOUS
        assert [pt.index for pt in s.points] == [1, 2, 3]

    def test_constant_diagonal(self):
        p = grid_profile([1, 2, 3], [0, 1, 2, 3], lambda g, c: 0.3 if c == g else 0.05)
        s = instantaneous(p)
        assert all(pt.value == 0.3 for pt in s.points)

    def test_no_bands_means_no_se(self):
        p = grid_profile([1, 2], [0, 1, 2], lambda g, c: 0.1)
        assert all(pt.se is None for pt in instantaneous(p).points)

    def test_carries_flags(self):
        p = grid_profile([1, 2], [0, 1, 2], lambda g, c: 0.5, with_flags=True)
        assert all(pt.significant for pt in instantaneous(p).points)


class TestPersistentAverage:
    def test_e0_equals_mean_of_instantaneous(self):
        rng = np.random.default_rng(5)
        p = grid_profile([1, 2, 3], [0, 1, 2, 3, 4], lambda g, c: float(rng.normal()))
        s = persistent_average(p)
        e0 = next(pt for pt in s.points if pt.index == 0)
        assert e0.value == pytest.approx(float(np.mean(instantaneous(p).values())), abs=1e-12)

    def test_single_group_equals_row(self):
        p = grid_profile([2], [0, 1, 2, 3, 4], lambda g, c: 0.25 * c)
        s = persistent_average(p)
        assert [pt.index for pt in s.points] == [0, 1, 2]
        assert [pt.value for pt in s.points] == [0.5, 0.75, 1.0]
        assert all(pt.n_cells == 1 for pt in s.points)

    def test_exponential_decay_truth(self):
        # noiseless panel: estimates equal the decaying truth surface, so the
        # average over groups at each event time is the decay curve itself
        tau, lam = 0.4, 3.0
        cfg = SynthConfig(
            n_per_group=3, n_validation=3,
            treatment_grid=(1, 2, 3), checkpoint_grid=(0, 1, 2, 3, 4, 5),
            effect=ExpDecayEffect(peak=tau, span=lam),
            trend=LinearTrend(0.1), seed=44,
        )
        panel, _ = generate_panel(cfg)
        profile = estimate_profile(panel, EstimatorKind.DID)
        s = persistent_average(profile)
        for pt in s.points:
            assert pt.value == pytest.approx(tau * math.exp(-pt.index / lam), abs=1e-10)

    def test_traceability(self):
        rng = np.random.default_rng(7)
        panel = random_panel(rng)
        profile = estimate_profile(panel, EstimatorKind.DID)
        s = persistent_average(profile)
        assert sum(pt.n_cells for pt in s.points) == len(profile.cells)


class TestResidual:
    def test_length(self):
        p = grid_profile([1, 2, 3], [0, 1, 2, 3], lambda g, c: 0.1)
        s = residual(p, 3)
        assert [pt.index for pt in s.points] == [1, 2, 3]

    def test_points_equal_profile_column_exactly(self):
        rng = np.random.default_rng(13)
        panel = random_panel(rng)
        profile = estimate_profile(panel, EstimatorKind.DID)
        t = int(panel.checkpoints[-1])
        s = residual(profile, t)
        for pt in s.points:
            assert pt.value == profile.cell(pt.index, t).estimate

    def test_rejects_t_before_treatment(self):
        p = grid_profile([1, 3], [0, 1, 2, 3], lambda g, c: 0.1)
        with pytest.raises(ValueError, match="precedes"):
            residual(p, 2)

    def test_rejects_t_off_grid(self):
        p = grid_profile([1], [0, 1, 2], lambda g, c: 0.1)
        with pytest.raises(ValueError, match="not covered"):
            residual(p, 99)

    def test_full_scale_grid_length(self):
        gs = list(range(1000, 96000, 1000))
        cs = list(range(0, 96000, 1000))
        p = grid_profile(gs, cs, lambda g, c: 0.0)
        assert len(residual(p, 95000).points) == 95

    def test_null_truth_within_bands(self):
        cfg = SynthConfig(
            n_per_group=40, n_validation=100,
            treatment_grid=(2, 4), checkpoint_grid=(0, 2, 4, 6),
            effect=ConstantEffect(0.0), trend=LinearTrend(0.05),
            instance_sd=0.6, noise_sd=0.5, seed=91,
        )
        panel, _ = generate_panel(cfg)
        profile = estimate_profile(panel, EstimatorKind.DID)
        bands = multiplier_bootstrap(panel, profile, 1000, 0.05, seed=17)
        masked = apply_bands(profile, bands)
        for pt in residual(masked, 6).points:
            assert abs(pt.value) <= bands.crit * pt.se


class TestCorrelation:
    def test_self_correlation(self):
        rng = np.random.default_rng(17)
        p = grid_profile([1, 2], [0, 1, 2, 3], lambda g, c: float(rng.normal()))
        assert profile_correlation(p, p) == pytest.approx(1.0, abs=1e-15)

    def test_negation(self):
        rng = np.random.default_rng(19)
        vals = {(g, c): float(rng.normal()) for g in [1, 2] for c in [0, 1, 2] if c >= g}
        p1 = profile_from(vals)
        p2 = profile_from({k: -v for k, v in vals.items()})
        assert profile_correlation(p1, p2) == pytest.approx(-1.0, abs=1e-15)

    def test_affine_invariance(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            vals = {(g, c): float(rng.normal()) for g in [1, 3] for c in range(5) if c >= g}
            a, b = float(rng.uniform(0.1, 5)), float(rng.normal())
            p1 = profile_from(vals)
            p2 = profile_from({k: a * v + b for k, v in vals.items()})
            assert profile_correlation(p1, p2) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(29)
        vals = {(g, c): float(rng.normal()) for g in [1, 2] for c in range(4) if c >= g}
        other = {k: float(rng.normal()) for k in vals}
        p1, p2 = profile_from(vals), profile_from(other)
        assert profile_correlation(p1, p2) == pytest.approx(profile_correlation(p2, p1), abs=1e-15)

    def test_mismatched_cells_rejected(self):
        p1 = grid_profile([1], [0, 1, 2], lambda g, c: 0.1)
        p2 = grid_profile([1], [0, 1, 2, 3], lambda g, c: 0.1)
        with pytest.raises(ValueError, match="different"):
            profile_correlation(p1, p2)

    def test_zero_variance_rejected(self):
        p1 = grid_profile([1], [0, 1, 2], lambda g, c: 0.5)
        p2 = grid_profile([1], [0, 1, 2], lambda g, c: 0.1 * c)
        with pytest.raises(ValueError, match="zero variance"):
            profile_correlation(p1, p2)

    def test_significant_only(self):
        vals = {(1, c): 0.3 * c for c in range(1, 5)}
        p1 = profile_from(vals, with_flags=True)
        p2 = profile_from({k: 2 * v for k, v in vals.items()}, with_flags=True)
        r = profile_correlation(p1, p2, significant_only=True)
        assert r == pytest.approx(1.0, abs=1e-12)


class TestSeriesCsv:
    def test_round_trip(self):
        rng = np.random.default_rng(31)
        panel = random_panel(rng)
        profile = estimate_profile(panel, EstimatorKind.DID)
        s = persistent_average(profile)
        buf = io.StringIO()
        write_series_csv(s, buf)
        again = read_series_csv(io.StringIO(buf.getvalue()))
        assert again.kind is s.kind
        assert [(p.index, p.value, p.n_cells) for p in again.points] == [
            (p.index, p.value, p.n_cells) for p in s.points
        ]

    def test_strictly_increasing_indices_enforced(self):
        from memprof.views import Series, SeriesPoint

        with pytest.raises(ValueError, match="strictly increasing"):
            Series(kind=SeriesKind.RESIDUAL, points=[
                SeriesPoint(index=2, value=0.0), SeriesPoint(index=1, value=0.0),
            ])

    def test_persistent_event_times_non_negative(self):
        from memprof.views import Series, SeriesPoint

        with pytest.raises(ValueError, match="non-negative"):
            Series(kind=SeriesKind.PERSISTENT_AVG, points=[SeriesPoint(index=-1, value=0.0)])
