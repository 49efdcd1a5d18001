import io

import numpy as np
import pytest

from memprof.panel import (NEVER, PanelError, baseline_checkpoint,
                           group_mean, load_panel, save_panel)

from conftest import make_panel, naive_group_mean


def csv_stream(text: str) -> io.StringIO:
    return io.StringIO(text)


MINIMAL = """instance_id,group,checkpoint,outcome
x0,1,0,-5.0
x0,1,1,-4.0
x0,1,2,-3.5
x1,1,0,-6.0
x1,1,1,-5.5
x1,1,2,-5.0
x2,2,0,-4.0
x2,2,1,-3.8
x2,2,2,-3.0
x3,inf,0,-5.0
x3,inf,1,-4.8
x3,inf,2,-4.6
"""


class TestLoadPanel:
    def test_minimal_well_formed(self):
        panel = load_panel(csv_stream(MINIMAL))
        assert panel.n_instances == 4
        assert panel.n_checkpoints == 3
        assert list(panel.treatment_grid) == [1, 2]
        assert panel.group_index.sizes[NEVER] == 1
        assert panel.outcomes[0, 1] == -4.0

    def test_rows_in_any_order(self):
        lines = MINIMAL.strip().splitlines()
        shuffled = [lines[0]] + lines[:0:-1]
        panel = load_panel(csv_stream("\n".join(shuffled) + "\n"))
        assert panel.outcomes[panel.instance_ids.index("x2"), 2] == -3.0

    def test_missing_cell_is_unbalanced(self):
        broken = MINIMAL.replace("x3,inf,2,-4.6\n", "")
        with pytest.raises(PanelError, match=r"unbalanced panel at \(x3, c=2\)"):
            load_panel(csv_stream(broken))

    def test_duplicate_cell(self):
        with pytest.raises(PanelError, match=r"duplicate cell \(x0, c=1\)"):
            load_panel(csv_stream(MINIMAL + "x0,1,1,-4.0\n"))

    def test_conflicting_group_assignment(self):
        with pytest.raises(PanelError, match="assigned to groups"):
            load_panel(csv_stream(MINIMAL + "x0,2,2,-1.0\n"))

    def test_no_never_instances(self):
        trimmed = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("x3")) + "\n"
        with pytest.raises(PanelError, match="no validation"):
            load_panel(csv_stream(trimmed))

    def test_non_finite_outcome(self):
        with pytest.raises(PanelError, match=r"non-finite outcome at \(x0, c=1\)"):
            load_panel(csv_stream(MINIMAL.replace("x0,1,1,-4.0", "x0,1,1,nan")))

    def test_empty_file(self):
        with pytest.raises(PanelError, match="no records"):
            load_panel(csv_stream(""))
        with pytest.raises(PanelError, match="no records"):
            load_panel(csv_stream("instance_id,group,checkpoint,outcome\n"))

    def test_bad_header(self):
        with pytest.raises(PanelError, match="bad header"):
            load_panel(csv_stream("a,b,c,d\nx,1,0,0.0\n"))

    def test_group_is_case_insensitive_inf(self):
        panel = load_panel(csv_stream(MINIMAL.replace("x3,inf", "x3,INF")))
        assert panel.group_index.sizes[NEVER] == 1

    def test_crlf_accepted(self):
        panel = load_panel(csv_stream(MINIMAL.replace("\n", "\r\n")))
        assert panel.n_instances == 4

    def test_bad_group_value(self):
        with pytest.raises(PanelError, match="invalid group"):
            load_panel(csv_stream(MINIMAL.replace("x0,1,0", "x0,one,0")))
        with pytest.raises(PanelError, match="positive"):
            load_panel(csv_stream(MINIMAL.replace("x0,1,0", "x0,0,0").replace("x0,1,1", "x0,0,1").replace("x0,1,2", "x0,0,2")))

    def test_group_without_baseline_checkpoint(self):
        # g = 1 equals the smallest checkpoint: no pre-treatment anchor
        text = (
            "instance_id,group,checkpoint,outcome\n"
            "x0,1,1,-5.0\nx0,1,2,-4.0\n"
            "x1,inf,1,-5.0\nx1,inf,2,-4.9\n"
        )
        with pytest.raises(PanelError, match="no baseline checkpoint"):
            load_panel(csv_stream(text))

    def test_accepts_binary_stream(self):
        panel = load_panel(io.BytesIO(MINIMAL.encode("utf-8")))
        assert panel.n_instances == 4


class TestRoundTrip:
    def test_save_load_bit_exact(self):
        rng = np.random.default_rng(7)
        panel = make_panel(
            checkpoints=[0, 3, 9, 27],
            groups_per_instance=[3, 3, 9, 9, "inf", "inf"],
            outcomes=rng.normal(-3.0, 2.0, size=(6, 4)),
        )
        buf = io.StringIO()
        save_panel(panel, buf)
        again = load_panel(csv_stream(buf.getvalue()))
        assert np.array_equal(again.outcomes, panel.outcomes)
        assert again.instance_ids == panel.instance_ids
        assert np.array_equal(again.groups, panel.groups)
        assert np.array_equal(again.checkpoints, panel.checkpoints)

    def test_opaque_ids_round_trip(self):
        # ids are opaque strings: commas, quotes and spaces must survive
        panel = make_panel(
            checkpoints=[0, 1],
            groups_per_instance=[1, "inf"],
            outcomes=[[0.5, 1.5], [2.5, 3.5]],
            ids=['doc, section "7"', "plain id"],
        )
        buf = io.StringIO()
        save_panel(panel, buf)
        again = load_panel(csv_stream(buf.getvalue()))
        assert again.instance_ids == panel.instance_ids
        assert np.array_equal(again.outcomes, panel.outcomes)

    def test_partition_property(self):
        rng = np.random.default_rng(11)
        from conftest import random_panel

        for _ in range(20):
            panel = random_panel(rng)
            sizes = panel.group_index.sizes
            assert sum(sizes.values()) == panel.n_instances
            covered = np.concatenate(list(panel.group_index.rows.values()))
            assert sorted(covered.tolist()) == list(range(panel.n_instances))


class TestGroupMean:
    def test_two_point_mean(self):
        panel = make_panel([0, 1], [1, 1, "inf"], [[-2.0, -2.0], [-4.0, -4.0], [0.0, 0.0]])
        assert group_mean(panel, 1, 1) == -3.0

    def test_single_instance_identity(self):
        panel = make_panel([0, 2], [2, "inf"], [[7.5, 7.5], [0.0, 1.0]])
        assert group_mean(panel, 2, 0) == 7.5

    def test_against_naive_resummation(self):
        rng = np.random.default_rng(23)
        groups = [5] * 60 + [9] * 40 + ["inf"] * 30
        outcomes = rng.normal(0, 3, size=(130, 4))
        panel = make_panel([0, 5, 9, 14], groups, outcomes)
        for g in (5, 9, NEVER):
            for c in (0, 5, 9, 14):
                fast = group_mean(panel, g, c)
                slow = naive_group_mean(panel, g, c)
                assert fast == pytest.approx(slow, rel=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(31)
        panel = make_panel([0, 1], [4, 4, "inf"], rng.normal(size=(3, 2)), treatment_grid=[4])
        for _ in range(25):
            a, b = rng.normal(size=2)
            scaled = make_panel([0, 1], [4, 4, "inf"], a * panel.outcomes + b, treatment_grid=[4])
            assert group_mean(scaled, 4, 1) == pytest.approx(a * group_mean(panel, 4, 1) + b, abs=1e-12)

    def test_errors(self):
        panel = make_panel([0, 1], [1, "inf"], [[0.0, 1.0], [0.0, 1.0]])
        with pytest.raises(PanelError, match="no instances"):
            group_mean(panel, 7, 1)
        with pytest.raises(PanelError, match="not in the panel grid"):
            group_mean(panel, 1, 99)


class TestBaselineCheckpoint:
    def test_immediate_predecessor(self):
        panel = make_panel([0, 1000, 2000], [1000, "inf"],
                           [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], treatment_grid=[1000, 2000])
        assert baseline_checkpoint(panel, 1000) == 0
        assert baseline_checkpoint(panel, 2000) == 1000

    def test_thousand_step_grid(self):
        cps = np.arange(0, 96000, 1000)
        panel = make_panel(cps, [57000, "inf"], np.zeros((2, len(cps))),
                           treatment_grid=[57000])
        assert baseline_checkpoint(panel, 57000) == 56000

    def test_strictly_less_than_g(self):
        rng = np.random.default_rng(3)
        from conftest import random_panel

        for _ in range(20):
            panel = random_panel(rng)
            for g in panel.treatment_grid:
                assert baseline_checkpoint(panel, int(g)) < g

    def test_missing_baseline(self):
        panel = make_panel([5, 9], [9, "inf"], [[0.0, 0.0], [0.0, 0.0]], treatment_grid=[9])
        with pytest.raises(PanelError, match="precede"):
            baseline_checkpoint(panel, 4)


class TestPanelValidation:
    def test_duplicate_ids(self):
        with pytest.raises(PanelError, match="duplicate instance_id"):
            make_panel([0, 1], [1, "inf"], [[0.0, 0.0], [0.0, 0.0]], ids=["a", "a"])

    def test_group_absent_from_grid(self):
        with pytest.raises(PanelError, match="absent from treatment grid"):
            make_panel([0, 1], [1, "inf"], [[0.0, 0.0], [0.0, 0.0]], treatment_grid=[7])

    def test_outcome_width_widened_to_float64(self):
        panel = make_panel([0, 1], [1, "inf"],
                           np.asarray([[0.5, 1.5], [2.5, 3.5]], dtype=np.float32))
        assert panel.outcomes.dtype == np.float64
